#include <doctest.h>

#include "hybridstab/buslib.hpp"
#include "hybridstab/error.hpp"

using namespace hybridstab;

namespace {

DamperParams table_machine() {
    DamperParams p;
    p.X = 0.114;
    p.Xd_p = 0.104;
    p.Xd_pp = 3.43e-4;
    p.Td_pp = 9.36e-5;
    p.Xq_p = 0.360;
    p.Xq_pp = 7.24e-4;
    p.Tq_pp = 1.17e-4;
    p.b_stator = 1.0 / (0.114 + 0.16 * 100.0 / 210.0);
    return p;
}

}  // namespace

TEST_SUITE("buslib") {
    TEST_CASE("damping coefficients of the 9-bus machine") {
        const DamperParams p = table_machine();
        CHECK(p.b_stator == doctest::Approx(5.2578868302453685).epsilon(1e-15));
        const DampingCoefficients d = damping_coefficient(p);
        CHECK(d.Dd == doctest::Approx(0.06190143490488649).epsilon(1e-12));
        CHECK(d.Dq == doctest::Approx(0.09302963560344576).epsilon(1e-12));
        CHECK(d.D == doctest::Approx(0.5 * (d.Dd + d.Dq)).epsilon(1e-15));
        CHECK(d.gamma == doctest::Approx(0.014733207038339977).epsilon(1e-12));
    }

    TEST_CASE("damping coefficient edge cases and monotonicity") {
        DamperParams p = table_machine();
        p.Xd_pp = p.Xd_p;
        CHECK(damping_coefficient(p).Dd == 0.0);

        const DamperParams base = table_machine();
        DamperParams twice = base;
        twice.Td_pp *= 2.0;
        CHECK(damping_coefficient(twice).Dd == doctest::Approx(2.0 * damping_coefficient(base).Dd));

        const double h = 1e-6;
        DamperParams up = base;
        up.Td_pp += h;
        CHECK(damping_coefficient(up).D > damping_coefficient(base).D);
        up = base;
        up.Tq_pp += h;
        CHECK(damping_coefficient(up).D > damping_coefficient(base).D);
        up = base;
        up.X += 1e-4;
        CHECK(damping_coefficient(up).D < damping_coefficient(base).D);

        DamperParams bad = base;
        bad.Xd_pp = 2.0 * bad.Xd_p;
        CHECK_THROWS_AS((void)damping_coefficient(bad), ParameterError);
    }

    TEST_CASE("machine gamma from damper data matches direct gamma") {
        const BusModel from_data = make_bus(BusKind::SG_governor, {{"Jw0", 7.4},
                                                                   {"kg", 20.0},
                                                                   {"tau", 3.0},
                                                                   {"X", 0.114},
                                                                   {"Xd_p", 0.104},
                                                                   {"Xd_pp", 3.43e-4},
                                                                   {"Td_pp", 9.36e-5},
                                                                   {"Xq_p", 0.360},
                                                                   {"Xq_pp", 7.24e-4},
                                                                   {"Tq_pp", 1.17e-4},
                                                                   {"b_stator", 5.2578868302453685}});
        const BusModel direct =
            make_bus(BusKind::SG_governor, {{"Jw0", 7.4}, {"kg", 20.0}, {"tau", 3.0}, {"gamma", 0.014733207038339977}});
        CHECK(equivalent(from_data.k, direct.k, 1e-12));
        CHECK(equivalent(from_data.g, direct.g));
    }

    TEST_CASE("catalog forms") {
        const BusModel sg = make_bus(BusKind::SG_governor, {{"Jw0", 7.4}, {"kg", 20.0}, {"tau", 3.0}, {"gamma", 0.0}});
        CHECK(equivalent(sg.g, RationalFunction(Polynomial({1.0, 3.0}), Polynomial({20.0, 7.4, 22.2}))));
        CHECK(bus_xi(sg, Complex(0.0, 0.0)) == doctest::Approx(20.0));

        const BusModel vsm = make_bus(BusKind::Battery_VSM, {{"Cdc", 0.5}, {"kbatt", 2.0}, {"mp", 3.0}, {"T", 0.2}});
        CHECK(equivalent(vsm.g * vsm.k, RationalFunction(Polynomial({3.0}), Polynomial({1.0, 0.2}))));

        const BusModel sc = make_bus(BusKind::SyncCondenser, {{"Jw0", 1.0}, {"gamma", 0.05}});
        for (double w : {0.1, 1.0, 7.0, 100.0}) {
            const double expect = 0.05 * w * w / (1.0 + 0.0025 * w * w);
            CHECK(bus_xi(sc, Complex(0.0, w)) == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(std::abs(bus_xi(sc, Complex(0.0, 1e-7))) < 1e-12);

        const BusModel wind = make_bus(BusKind::Wind_SG, {{"Jw0", 4.0},
                                                          {"gamma", 0.0},
                                                          {"kw_wind", 0.0},
                                                          {"kbeta", 0.0},
                                                          {"kp_pitch", 1.0},
                                                          {"tau_beta", 0.5}});
        CHECK(equivalent(wind.g, RationalFunction(Polynomial({1.0}), Polynomial({0.0, 4.0}))));

        const BusModel dp = make_bus(BusKind::HVDC_dualport, {{"Cdc", 1.0}, {"kw", 2.0}, {"kp", 0.3}});
        CHECK(equivalent(dp.k, RationalFunction(Polynomial({2.0, 0.3}), Polynomial({1.0}))));
        CHECK(dp.converter());
        CHECK_FALSE(sg.converter());
        CHECK(sg.machine());
    }

    TEST_CASE("grid-following converter loses passivity") {
        const BusModel gfl =
            make_bus(BusKind::GFL_droop, {{"pll_kp", 50.0}, {"pll_ki", 1000.0}, {"D", 20.0}, {"tau_d", 0.1}});
        double min_xi = 1e300;
        for (double w = 1e-2; w < 1e4; w *= 1.05) {
            min_xi = std::min(min_xi, bus_xi(gfl, Complex(0.0, w)));
        }
        CHECK(min_xi < 0.0);
    }

    TEST_CASE("steady-state damping of governed kinds") {
        const BusModel pv = make_bus(BusKind::PV_dualport_offMPP, {{"Cdc", 1.0}, {"kpv", 2.0}, {"kw", 1.0}, {"kp", 0.1}});
        const BusModel bat = make_bus(BusKind::Battery_droop, {{"Cdc", 1.0}, {"kbatt", 2.0}, {"mp", 1.0}});
        CHECK(bus_xi(pv, Complex(0.0, 0.0)) > 0.0);
        CHECK(bus_xi(bat, Complex(0.0, 0.0)) > 0.0);
    }

    TEST_CASE("parameter validation") {
        CHECK_THROWS_AS((void)make_bus(BusKind::SG_governor, {{"Jw0", 7.4}, {"kg", 20.0}, {"gamma", 0.0}}), ParameterError);
        try {
            (void)make_bus(BusKind::SG_governor, {{"Jw0", -1.0}, {"kg", 20.0}, {"tau", 3.0}, {"gamma", 0.0}});
            FAIL("expected ParameterError");
        } catch (const ParameterError& e) {
            CHECK(e.field() == "Jw0");
        }
        CHECK_THROWS_AS((void)make_bus(BusKind::HVDC_dualport, {{"Cdc", 1.0}, {"kw", 1.0}, {"kp", 0.1}, {"bogus", 1.0}}),
                        ParameterError);
        CHECK(bus_kind_from_string("HVDC_dualport") == BusKind::HVDC_dualport);
        CHECK_FALSE(bus_kind_from_string("Nuclear"));
        for (BusKind k : all_bus_kinds()) {
            CHECK(bus_kind_from_string(to_string(k)) == k);
        }
    }
}
