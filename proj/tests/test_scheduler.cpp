#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ddls;

namespace {

oracle::ToyProblem random_toy(std::mt19937_64& rng, int max_apps = 3)
{
    oracle::ToyProblem p;
    p.lookahead = 4 + static_cast<int>(rng() % 3);
    const int nq = 1 + static_cast<int>(rng() % 2);
    for (int q = 0; q < nq; ++q) {
        const int u = 1 + static_cast<int>(rng() % 3);
        std::vector<double> g(static_cast<std::size_t>(u));
        for (auto& x : g) x = static_cast<double>(1 + rng() % 3);
        p.book.emplace_back(q + 1, g, g[0]);
    }
    const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_apps));
    for (int i = 0; i < n; ++i) {
        const int q = static_cast<int>(rng() % static_cast<unsigned>(nq));
        const int latest = p.lookahead - p.book[static_cast<std::size_t>(q)].duration();
        p.apps.push_back({static_cast<std::int64_t>(rng() % static_cast<unsigned>(latest + 1)), q});
    }
    std::sort(p.apps.begin(), p.apps.end(), [](auto& a, auto& b) { return a.arrival < b.arrival; });
    const auto w = static_cast<std::size_t>(p.lookahead) + 1;
    p.zic.resize(w);
    p.up.resize(w);
    p.dn.resize(w);
    for (std::size_t t = 0; t < w; ++t) {
        p.zic[t] = static_cast<double>(rng() % 6);
        p.up[t] = 0.5 + static_cast<double>(rng() % 4) * 0.5;
        p.dn[t] = 0.25 + static_cast<double>(rng() % 4) * 0.25;
    }
    for (int q = 0; q < nq; ++q) p.delay.push_back(0.1 * static_cast<double>(rng() % 5));
    return p;
}

Codebook toy_book() { return {ChargeCode(1, {2.0, 2.0}, 2.0), ChargeCode(2, {1.0, 3.0, 1.0}, 3.0)}; }

} // namespace

TEST(Gamma, FirstColumnUnderDepartureAlignment)
{
    const Codebook book{ChargeCode(1, {2.0, 2.0}, 2.0)};
    const auto g = build_gamma(book, 3);
    ASSERT_EQ(g.rows(), 4u);
    ASSERT_EQ(g.cols(), 4u);
    // D = (1, 1, 1, 1) is a single switch-on at epoch 0.
    std::vector<double> load(4, 0.0);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 0; k < 4; ++k) load[t] += g(t, k);
    EXPECT_EQ(load, (std::vector<double>{2.0, 2.0, 0.0, 0.0}));
}

TEST(Gamma, ZeroPulseGivesZeroMatrix)
{
    const auto g = build_gamma({ChargeCode(1, {0.0, 0.0}, 0.0)}, 4);
    for (std::size_t t = 0; t < g.rows(); ++t)
        for (std::size_t k = 0; k < g.cols(); ++k) EXPECT_EQ(g(t, k), 0.0);
}

TEST(Gamma, PulseLongerThanHorizonIsConfigError)
{
    EXPECT_THROW(build_gamma({ChargeCode::square(1, 1.0, 5)}, 4), ConfigError);
}

TEST(Gamma, ReproducesSynthesizedLoad)
{
    std::mt19937_64 rng(31);
    for (auto align : {PulseAlignment::at_departure, PulseAlignment::next_epoch}) {
        for (int trial = 0; trial < 10; ++trial) {
            const int T = 6;
            const auto g = build_gamma(toy_book(), T, align);
            std::vector<Counts> inc(2, Counts(T + 1, 0));
            std::vector<double> d(2 * (T + 1));
            for (std::size_t q = 0; q < 2; ++q) {
                Count cum = 0;
                for (std::size_t t = 0; t <= static_cast<std::size_t>(T); ++t) {
                    inc[q][t] = static_cast<Count>(rng() % 3);
                    cum += inc[q][t];
                    d[q * (T + 1) + t] = static_cast<double>(cum);
                }
            }
            const auto s = synthesize_load(inc, toy_book(), T + 1, align);
            for (std::size_t t = 0; t <= static_cast<std::size_t>(T); ++t) {
                double v = 0.0;
                for (std::size_t j = 0; j < d.size(); ++j) v += g(t, j) * d[j];
                EXPECT_NEAR(v, s.samples[t], 1e-9);
            }
        }
    }
}

TEST(BuildProgram, NoArrivalsLeavesOnlyZicDeviation)
{
    HorizonInputs in;
    in.lookahead = 3;
    in.codebook = {ChargeCode::square(1, 2.0, 2)};
    in.zic = {3.0, -1.0, 0.0, 2.0};
    in.price_up = {1.0, 2.0, 1.0, 1.0};
    in.price_dn = {0.5, 0.5, 0.5, 0.25};
    in.delay = DelayPrices::uniform(1, 1.0);
    in.arrivals = {{0.0, 0.0, 0.0, 0.0}};
    in.departed_before = {0};
    const auto sp = build_program(in);
    const auto sol = lp::solve(sp.lp);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(sol.objective, 0.5 * 3.0 + 2.0 * 1.0 + 0.25 * 2.0, 1e-9);
    const auto plan = extract_plan(sp, sol);
    EXPECT_NEAR(plan.p_up[1], 1.0, 1e-9);
    EXPECT_NEAR(plan.p_dn[0], 3.0, 1e-9);
}

TEST(BuildProgram, SingleApplianceFillsTheBump)
{
    HorizonInputs in;
    in.lookahead = 2;
    in.codebook = {ChargeCode(1, {2.0}, 2.0)};
    in.zic = {0.0, 2.0, 0.0};
    in.price_up = {1.0, 1.0, 1.0};
    in.price_dn = {1.0, 1.0, 1.0};
    in.delay = DelayPrices::uniform(1, 0.1);
    in.arrivals = {{1.0, 1.0, 1.0}};
    in.departed_before = {0};
    const auto sp = build_program(in);
    const auto sol = lp::solve(sp.lp);
    ASSERT_TRUE(sol.optimal());
    const auto plan = extract_plan(sp, sol);
    EXPECT_NEAR(plan.departures[0][0], 0.0, 1e-9);
    EXPECT_NEAR(plan.departures[0][1], 1.0, 1e-9);
    EXPECT_NEAR(sol.objective, 0.1, 1e-9);
}

TEST(BuildProgram, IntegralPointsCostTheirScheduleCost)
{
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_toy(rng);
        const auto sp = build_program(oracle::toy_inputs(p));
        const auto best = oracle::enumerate_schedules(p);
        // Embed the optimal integer schedule as an LP point.
        std::vector<double> x(sp.lp.variables(), 0.0);
        for (std::size_t i = 0; i < p.apps.size(); ++i)
            for (std::size_t t = static_cast<std::size_t>(best.starts[i]); t < sp.window; ++t)
                x[sp.d_index(static_cast<std::size_t>(p.apps[i].queue), t)] += 1.0;
        std::vector<oracle::Switch> on;
        for (std::size_t i = 0; i < p.apps.size(); ++i) on.push_back({best.starts[i], p.apps[i].queue});
        const auto load = oracle::per_appliance_load(on, p.book, p.lookahead + 1, p.align);
        for (std::size_t t = 0; t < sp.window; ++t) {
            x[sp.up_index(t)] = std::max(load[t] - p.zic[t], 0.0);
            x[sp.dn_index(t)] = std::max(p.zic[t] - load[t], 0.0);
        }
        EXPECT_LE(lp::max_violation(sp.lp, x), 1e-9);
        EXPECT_NEAR(lp::evaluate_objective(sp.lp, x), best.cost, 1e-9);
    }
}

TEST(BuildProgram, RelaxationLowerBoundsEnumeration)
{
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 60; ++trial) {
        const auto p = random_toy(rng);
        const auto sol = lp::solve(build_program(oracle::toy_inputs(p)).lp);
        ASSERT_TRUE(sol.optimal());
        EXPECT_LE(sol.objective, oracle::enumerate_schedules(p).cost + 1e-7);
    }
}

TEST(BuildProgram, CompletionAndMonotonicityHold)
{
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_toy(rng);
        const auto in = oracle::toy_inputs(p);
        const auto sp = build_program(in);
        const auto plan = extract_plan(sp, lp::solve(sp.lp));
        for (std::size_t q = 0; q < p.book.size(); ++q) {
            const auto tc = static_cast<std::size_t>(p.lookahead - p.book[q].duration());
            EXPECT_NEAR(plan.departures[q][tc], in.arrivals[q][tc], 1e-9);
            for (std::size_t t = 0; t < sp.window; ++t) {
                EXPECT_LE(plan.departures[q][t], in.arrivals[q][t] + 1e-9);
                if (t > 0) {
                    EXPECT_GE(plan.departures[q][t], plan.departures[q][t - 1] - 1e-9);
                }
            }
        }
        for (std::size_t t = 0; t < sp.window; ++t) EXPECT_LE(std::min(plan.p_up[t], plan.p_dn[t]), 1e-7);
    }
}

TEST(BuildProgram, InconsistentFloorsAreReportedWithEpoch)
{
    HorizonInputs in;
    in.lookahead = 2;
    in.codebook = {ChargeCode(1, {1.0}, 1.0)};
    in.zic = {0.0, 0.0, 0.0};
    in.price_up = in.price_dn = {1.0, 1.0, 1.0};
    in.delay = DelayPrices::uniform(1, 0.0);
    in.arrivals = {{1.0, 1.0, 1.0}};
    in.departed_before = {0};
    in.min_departures = {{0.0, 2.0, 2.0}};
    try {
        build_program(in);
        FAIL() << "expected an infeasibility report";
    } catch (const SolverError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    }
}

TEST(RoundAndCommit, RoundsThenClamps)
{
    HorizonInputs in;
    in.lookahead = 1;
    in.codebook = {ChargeCode(1, {1.0}, 1.0), ChargeCode(2, {1.0}, 1.0)};
    in.arrivals = {{5.0, 5.0}, {3.0, 3.0}};
    in.departed_before = {1, 0};
    SchedulePlan plan;
    plan.departures = {{2.4, 5.0}, {3.7, 3.0}};
    EXPECT_EQ(round_and_commit(plan, in), (Counts{2, 3}));
    plan.departures = {{0.2, 5.0}, {2.5, 3.0}};
    EXPECT_EQ(round_and_commit(plan, in), (Counts{1, 2}));
}

TEST(RoundAndCommit, RandomRelaxedValuesKeepLedgerInvariants)
{
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-1.0, 8.0);
    for (int trial = 0; trial < 200; ++trial) {
        HorizonInputs in;
        in.lookahead = 0;
        in.codebook = {ChargeCode(1, {1.0}, 1.0)};
        const auto a = static_cast<Count>(rng() % 6);
        const auto prev = a == 0 ? 0 : static_cast<Count>(rng() % static_cast<std::uint64_t>(a + 1));
        in.arrivals = {{static_cast<double>(a)}};
        in.departed_before = {prev};
        SchedulePlan plan;
        plan.departures = {{u(rng)}};
        const auto d = round_and_commit(plan, in)[0];
        EXPECT_GE(d, prev);
        EXPECT_LE(d, a);
    }
}

TEST(CapacityCap, RoundRobinFromFirstQueue)
{
    const Counts c{2, 2};
    EXPECT_EQ(apply_capacity_cap(c, std::nullopt), c);
    EXPECT_EQ(apply_capacity_cap(c, Count{0}), (Counts{0, 0}));
    EXPECT_EQ(apply_capacity_cap(c, Count{3}), (Counts{2, 1}));
    EXPECT_EQ(apply_capacity_cap(Counts{0, 5, 1}, Count{3}), (Counts{0, 2, 1}));
    EXPECT_THROW(apply_capacity_cap(c, Count{-1}), ConfigError);
}

TEST(CertaintyEquivalent, UsesObservedThenExpected)
{
    QueueLedger ledger(2);
    ledger.record_arrivals(0, Counts{1, 0});
    ledger.record_arrivals(1, Counts{2, 1});
    const ArrivalForecast f{{std::vector<double>(10, 2.0), std::vector<double>(10, 0.0)}};
    const auto a = certainty_equivalent_arrivals(ledger, f, 1, 3);
    EXPECT_EQ(a[0], (std::vector<double>{3.0, 5.0, 7.0, 9.0}));
    EXPECT_EQ(a[1], (std::vector<double>{1.0, 1.0, 1.0, 1.0}));
    const auto cut = certainty_equivalent_arrivals(ledger, f, 1, 3, KnowledgeHorizons{-1, 1});
    EXPECT_EQ(cut[0], (std::vector<double>{3.0, 5.0, 5.0, 5.0}));
}

TEST(CertaintyEquivalent, MatchesMonteCarloMean)
{
    const double lam = 1.5;
    const int runs = 10000, T = 4;
    std::vector<double> mean(T + 1, 0.0);
    for (int r = 0; r < runs; ++r) {
        Rng rng(99, static_cast<std::uint64_t>(r));
        double cum = 0.0;
        for (int t = 0; t <= T; ++t) {
            if (t > 0) cum += static_cast<double>(rng.poisson(lam));
            mean[static_cast<std::size_t>(t)] += cum / runs;
        }
    }
    QueueLedger ledger(1);
    ledger.record_arrivals(0, Counts{0});
    const auto a = certainty_equivalent_arrivals(ledger, ArrivalForecast::constant(1, lam, 10), 0, T);
    for (int t = 1; t <= T; ++t) EXPECT_NEAR(mean[static_cast<std::size_t>(t)], a[0][static_cast<std::size_t>(t)], 0.02 * a[0][static_cast<std::size_t>(t)]);
}

namespace {

MarketProfile flat_market(std::size_t n, double zic, double up = 1.0, double dn = 1.0)
{
    return MarketProfile(std::vector<double>(n, zic), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                         std::vector<double>(n, up), std::vector<double>(n, dn));
}

} // namespace

TEST(Scheduler, NoArrivalsGivesZeroTrajectory)
{
    SchedulerConfig cfg;
    cfg.codebook = toy_book();
    cfg.lookahead = 6;
    cfg.delay = DelayPrices::uniform(2, 0.1);
    Scheduler s(cfg, flat_market(20, 0.0), ArrivalForecast{});
    const auto tr = run_horizon(s, {}, 10);
    for (const auto& r : tr.rows) {
        EXPECT_EQ(r.ds_load, 0.0);
        EXPECT_EQ(r.stage_cost, 0.0);
    }
}

TEST(Scheduler, DeadlinesAndLedgerInvariantsHold)
{
    SchedulerConfig cfg;
    cfg.codebook = toy_book();
    cfg.lookahead = 8;
    cfg.deadline = 4;
    cfg.delay = DelayPrices::uniform(2, 0.0);
    // No supply at all: without the deadline everything would wait forever.
    Scheduler s(cfg, flat_market(40, 0.0), ArrivalForecast::constant(2, 0.5, 12));
    Rng rng(5, 0);
    std::vector<Counts> arrivals(12, Counts(2));
    for (auto& a : arrivals)
        for (auto& x : a) x = rng.poisson(0.5);
    run_horizon(s, arrivals, 30);
    const auto& led = s.ledger();
    for (std::size_t q = 0; q < 2; ++q) {
        for (std::int64_t l = 0; l < 30; ++l) {
            EXPECT_LE(led.departures(q, l), led.arrivals(q, l));
            if (l >= 4) {
                EXPECT_GE(led.departures(q, l), led.arrivals(q, l - 4));
            }
        }
    }
}

TEST(Scheduler, FlatZicMatchingDemandIsTrackedClosely)
{
    // Four unit appliances arriving at once; ZIC supplies one per epoch.
    SchedulerConfig cfg;
    cfg.codebook = {ChargeCode(1, {1.0}, 1.0)};
    cfg.lookahead = 6;
    cfg.delay = DelayPrices::uniform(1, 0.05);
    const std::vector<double> zic{1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    const MarketProfile m(zic, std::vector<double>(zic.size(), 0.0), std::vector<double>(zic.size(), 0.0),
                          std::vector<double>(zic.size(), 1.0), std::vector<double>(zic.size(), 1.0));
    Scheduler s(cfg, m, ArrivalForecast{});
    const auto tr = run_horizon(s, {Counts{4}}, 6);
    double dev = 0.0;
    for (const auto& r : tr.rows) dev += r.p_up + r.p_dn;
    EXPECT_NEAR(dev, 0.0, 1e-9);

    oracle::ToyProblem p;
    p.lookahead = 6;
    p.book = cfg.codebook;
    for (int i = 0; i < 4; ++i) p.apps.push_back({0, 0});
    p.zic.assign(zic.begin(), zic.begin() + 7);
    p.up.assign(7, 1.0);
    p.dn.assign(7, 1.0);
    p.delay = {0.05};
    EXPECT_NEAR(tr.total_cost(), oracle::enumerate_schedules(p).cost, 1e-9);
}

TEST(Scheduler, FirstRecedingStepCommitsTheOneShotDecision)
{
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = random_toy(rng);
        const auto in = oracle::toy_inputs(p);
        const auto plan = extract_plan(build_program(in), lp::solve(build_program(in).lp));
        const auto want = round_and_commit(plan, in);

        const auto n = static_cast<std::size_t>(p.lookahead) + 1;
        std::vector<double> zic(3 * n, 0.0), up(3 * n, p.up.back()), dn(3 * n, p.dn.back());
        for (std::size_t t = 0; t < n; ++t) {
            zic[t] = p.zic[t];
            up[t] = p.up[t];
            dn[t] = p.dn[t];
        }
        const MarketProfile m(zic, std::vector<double>(3 * n, 0.0), std::vector<double>(3 * n, 0.0), up, dn);
        std::vector<Counts> arrivals(n, Counts(p.book.size(), 0));
        for (const auto& a : p.apps) ++arrivals[static_cast<std::size_t>(a.arrival)][static_cast<std::size_t>(a.queue)];
        std::vector<std::vector<double>> exact(p.book.size(), std::vector<double>(n, 0.0));
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t q = 0; q < p.book.size(); ++q) exact[q][t] = static_cast<double>(arrivals[t][q]);
        SchedulerConfig cfg;
        cfg.codebook = p.book;
        cfg.lookahead = p.lookahead;
        cfg.delay = DelayPrices{p.delay, {}};
        Scheduler s(cfg, m, ArrivalForecast{exact});
        const auto first = s.step(arrivals[0]);
        EXPECT_EQ(first.increments, want) << "trial " << trial;

        for (std::size_t t = 1; t < n; ++t) s.step(arrivals[t]);
        for (std::size_t t = n; t < 2 * n; ++t) s.step(Counts(p.book.size(), 0));
        for (std::size_t q = 0; q < p.book.size(); ++q) EXPECT_EQ(s.ledger().backlog(q, static_cast<std::int64_t>(2 * n) - 1), 0);
    }
}

TEST(Scheduler, RealizedStageCostMatchesPlanWhenRoundingIsExact)
{
    SchedulerConfig cfg;
    cfg.codebook = toy_book();
    cfg.lookahead = 8;
    cfg.delay = DelayPrices::uniform(2, 0.2);
    std::vector<double> zic(40);
    for (std::size_t l = 0; l < zic.size(); ++l) zic[l] = 4.0 + 3.0 * std::sin(0.4 * static_cast<double>(l));
    const MarketProfile m(zic, std::vector<double>(40, 0.0), std::vector<double>(40, 0.0), std::vector<double>(40, 1.0),
                          std::vector<double>(40, 0.7));
    Scheduler s(cfg, m, ArrivalForecast::constant(2, 0.8, 20));
    Rng rng(8, 0);
    int exact = 0, total = 0;
    for (std::int64_t l = 0; l < 30; ++l) {
        Counts a(2);
        for (auto& x : a) x = l < 20 ? rng.poisson(0.8) : 0;
        const Counts before{s.ledger().departures(0, l - 1), s.ledger().departures(1, l - 1)};
        const auto res = s.step(a);
        bool same = true;
        for (std::size_t q = 0; q < 2; ++q)
            same = same && std::fabs(res.plan.departures[q][0] - static_cast<double>(before[q] + res.increments[q])) < 1e-9;
        ++total;
        if (!same) continue;
        ++exact;
        Counts backlog{s.ledger().backlog(0, l), s.ledger().backlog(1, l)};
        const std::vector<double> ci{0.2, 0.2};
        EXPECT_NEAR(stage_cost(s.load().at(l), m.zic(l), m.price_up(l), m.price_dn(l), backlog, ci), res.planned_stage_cost, 1e-7)
            << "epoch " << l;
    }
    EXPECT_GE(exact, total / 2);
}

TEST(Scheduler, IdenticalInputsGiveIdenticalTrajectories)
{
    auto run = [] {
        SchedulerConfig cfg;
        cfg.codebook = toy_book();
        cfg.lookahead = 6;
        cfg.delay = DelayPrices::uniform(2, 0.3);
        Scheduler s(cfg, flat_market(40, 5.0, 1.0, 0.5), ArrivalForecast::constant(2, 1.0, 15));
        Rng rng(3, 0);
        std::vector<Counts> arrivals(15, Counts(2));
        for (auto& a : arrivals)
            for (auto& x : a) x = rng.poisson(1.0);
        std::ostringstream os;
        write_trajectory_csv(os, run_horizon(s, arrivals, 25), 2);
        return os.str();
    };
    EXPECT_EQ(run(), run());
}

TEST(Scheduler, HistoryCoversLastMaxPulseDecisions)
{
    SchedulerConfig cfg;
    cfg.codebook = {ChargeCode::square(1, 1.0, 3)};
    cfg.lookahead = 4;
    cfg.max_pulse = 3;
    cfg.delay = DelayPrices::uniform(1, 0.1);
    Scheduler s(cfg, flat_market(20, 1.0), ArrivalForecast{});
    for (int l = 0; l < 6; ++l) {
        s.step(Counts{1});
        const auto in = s.horizon_inputs();
        EXPECT_EQ(in.history.size(), static_cast<std::size_t>(std::min(l + 1, 3)));
    }
}
