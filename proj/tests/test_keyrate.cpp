#include <doctest.h>

#include <qkd/keyrate.hpp>
#include <qkd/photonics.hpp>

#include <cmath>
#include <string>

using namespace qkd::keyrate;

namespace {

// benign reference scenario used throughout: mu=0.5, nu=0.1, eta=0.01,
// y0=1e-5, e_d=0.01, with values pinned from a high-precision evaluation of
// the closed forms
constexpr double kRefQmu = 0.004997470932109613;
constexpr double kRefEmu = 0.010980595749060626;
constexpr double kRefQnu = 0.0010094901716233421;
constexpr double kRefEnu = 0.014854034331148469;
constexpr double kRefY1 = 0.009706021434279043;
constexpr double kRefE1 = 0.011922536784398761;

RateModelParams reference_params() {
    RateModelParams p;
    p.mu = 0.5;
    p.eta = 0.01;
    p.y0 = 1e-5;
    p.e_d = 0.01;
    p.f_ec = 1.22;
    p.q = 0.5;
    return p;
}

} // namespace

TEST_SUITE("keyrate") {

TEST_CASE("multi-photon fraction matches pinned closed-form values") {
    CHECK(p_multi(0.1) == doctest::Approx(0.0046788401604444695).epsilon(1e-13));
    CHECK(p_multi(0.5) == doctest::Approx(0.09020401043104986).epsilon(1e-13));
    CHECK(p_multi(1.0) == doctest::Approx(0.2642411176571154).epsilon(1e-13));
    // small-mu branch, where the naive expression cancels catastrophically
    CHECK(p_multi(1e-5) == doctest::Approx(4.999966666791666e-11).epsilon(1e-12));
    CHECK(p_multi(5e-5) == doctest::Approx(1.2499583341145729e-9).epsilon(1e-12));
    CHECK(p_multi(2e-4) == doctest::Approx(1.999733353332267e-8).epsilon(1e-12));
    CHECK(p_multi(0.0) == 0.0);
}

TEST_CASE("multi-photon fraction is smooth and monotone across the branch switch") {
    double prev = 0.0;
    for (double mu = 1e-6; mu < 1e-2; mu *= 1.15) {
        double v = p_multi(mu);
        CHECK(v > prev);
        prev = v;
    }
    // relative continuity right at the series/direct boundary
    double lo = p_multi(1e-4 * (1.0 - 1e-9));
    double hi = p_multi(1e-4 * (1.0 + 1e-9));
    CHECK(std::abs(hi - lo) / hi < 1e-6);
}

TEST_CASE("reception probability and its printed variant") {
    CHECK(p_rec(0.1, 0.1) == doctest::Approx(0.009950166250831946).epsilon(1e-13));
    CHECK(p_rec(0.5, 0.05) == doctest::Approx(0.024690087971667331).epsilon(1e-13));
    CHECK(p_rec_printed_variant(0.1, 0.1) == doctest::Approx(0.9900995016625083).epsilon(1e-13));
    CHECK(p_rec_printed_variant(0.5, 0.05) == doctest::Approx(0.9756172521992917).epsilon(1e-13));
}

TEST_CASE("approximate rate is reception minus multi-photon") {
    CHECK(approx_rate(0.5, 0.05) == doctest::Approx(-0.06551392245938253).epsilon(1e-12));
    CHECK(approx_rate(0.1, 0.1) == doctest::Approx(0.005271326090387477).epsilon(1e-12));
    for (double mu : {0.05, 0.2, 0.8}) {
        for (double eta : {0.01, 0.3}) {
            CHECK(approx_rate(mu, eta) ==
                  doctest::Approx(p_rec(mu, eta) - p_multi(mu)).epsilon(1e-14));
            CHECK(approx_rate(mu, eta, true) ==
                  doctest::Approx(p_rec_printed_variant(mu, eta) - p_multi(mu)).epsilon(1e-14));
        }
    }
}

TEST_CASE("binary entropy reference values and symmetry") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(binary_entropy(0.11) == doctest::Approx(0.4999159581645280).epsilon(1e-13));
    CHECK(binary_entropy(0.25) == doctest::Approx(0.8112781244591329).epsilon(1e-13));
    CHECK(binary_entropy(0.01) == doctest::Approx(0.08079313589591117).epsilon(1e-13));
    CHECK(binary_entropy(0.05) == doctest::Approx(0.2863969571159561).epsilon(1e-13));
    for (double x : {0.03, 0.2, 0.41})
        CHECK(binary_entropy(x) == doctest::Approx(binary_entropy(1.0 - x)).epsilon(1e-14));
}

TEST_CASE("single-photon rate crosses zero near eleven percent") {
    double e = single_photon_error_threshold();
    CHECK(e == doctest::Approx(0.11002786443835955).epsilon(1e-9));
    CHECK(std::abs(single_photon_rate(e)) < 1e-9);
    CHECK(single_photon_rate(e - 1e-3) > 0.0);
    CHECK(single_photon_rate(e + 1e-3) < 0.0);
}

TEST_CASE("scalar maximizer finds interior optima") {
    double x = maximize_scalar([](double v) { return -(v - 2.0) * (v - 2.0); }, 0.0, 5.0);
    CHECK(x == doctest::Approx(2.0).epsilon(1e-8));
    double s = maximize_scalar([](double v) { return std::sin(v); }, 0.0, 3.141592653589793);
    CHECK(s == doctest::Approx(1.5707963267948966).epsilon(1e-8));
}

TEST_CASE("optimal intensity tracks the transmittance") {
    MuOpt a = optimize_mu(0.01);
    CHECK(a.mu == doctest::Approx(0.010100496535445845).epsilon(1e-7));
    CHECK(a.rate == doctest::Approx(5.0332036200189194e-5).epsilon(1e-11));
    CHECK(a.rate / (0.01 * 0.01 / 2.0) == doctest::Approx(1.0066407240).epsilon(1e-8));

    MuOpt b = optimize_mu(0.001);
    CHECK(b.mu == doctest::Approx(0.0010010004996653730).epsilon(1e-7));
    CHECK(b.rate == doctest::Approx(5.003332078662013e-7).epsilon(1e-11));
}

TEST_CASE("gain and qber model at pinned reference points") {
    RateModelParams p = reference_params();
    GainQber s = model_gain_qber(p);
    CHECK(s.qber_defined);
    CHECK(s.gain == doctest::Approx(kRefQmu).epsilon(1e-13));
    CHECK(s.qber == doctest::Approx(kRefEmu).epsilon(1e-13));

    p.mu = 0.1;
    GainQber w = model_gain_qber(p);
    CHECK(w.gain == doctest::Approx(kRefQnu).epsilon(1e-13));
    CHECK(w.qber == doctest::Approx(kRefEnu).epsilon(1e-13));

    p.mu = 0.0;
    GainQber v = model_gain_qber(p);
    CHECK(v.gain == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(v.qber == 0.5);

    p.y0 = 0.0;
    GainQber dead = model_gain_qber(p);
    CHECK(dead.gain == 0.0);
    CHECK_FALSE(dead.qber_defined);
}

TEST_CASE("modelled observations carry the three intensity roles") {
    auto obs = model_observations(reference_params(), 0.1);
    REQUIRE(obs.size() == 3);
    CHECK(obs[0].label == "vacuum");
    CHECK(obs[0].mu == 0.0);
    CHECK(obs[0].gain == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(obs[0].qber == 0.5);
    CHECK(obs[1].label == "decoy");
    CHECK(obs[1].mu == 0.1);
    CHECK(obs[1].gain == doctest::Approx(kRefQnu).epsilon(1e-13));
    CHECK(obs[2].label == "signal");
    CHECK(obs[2].mu == 0.5);
    CHECK(obs[2].gain == doctest::Approx(kRefQmu).epsilon(1e-13));
    CHECK_THROWS_AS(model_observations(reference_params(), 0.5), std::invalid_argument);
    CHECK_THROWS_AS(model_observations(reference_params(), 0.0), std::invalid_argument);
}

TEST_CASE("two-intensity bound matches its pinned reference") {
    auto obs = model_observations(reference_params(), 0.1);
    YieldBounds b = decoy_bounds(obs);
    CHECK(b.method == YieldBounds::Method::two_intensity_analytic);
    CHECK(b.y1_lower == doctest::Approx(kRefY1).epsilon(1e-12));
    CHECK(b.e1_upper == doctest::Approx(kRefE1).epsilon(1e-12));
    CHECK_FALSE(b.vacuous);
    CHECK_FALSE(b.suppression);
    // the bound must stay below the true single-photon yield
    CHECK(b.y1_lower <= 1e-5 + 0.01 * (1.0 - 1e-5));
}

TEST_CASE("feasibility oracle agrees with the closed form") {
    auto obs = model_observations(reference_params(), 0.1);
    YieldBounds lp = decoy_bounds(obs, YieldBounds::Method::lp_oracle);
    CHECK(lp.method == YieldBounds::Method::lp_oracle);
    CHECK(std::abs(lp.y1_lower - kRefY1) < 1e-6);
    CHECK(std::abs(lp.e1_upper - kRefE1) < 1e-6);
}

TEST_CASE("role identification works without labels and rejects malformed sets") {
    auto obs = model_observations(reference_params(), 0.1);
    obs[0].label = "a";
    obs[1].label = "b";
    obs[2].label = "c";  // falls back to largest mu as the signal
    YieldBounds b = decoy_bounds(obs);
    CHECK(b.y1_lower == doctest::Approx(kRefY1).epsilon(1e-12));

    DecoyObservations no_vacuum = {obs[1], obs[2]};
    CHECK_THROWS_AS(decoy_bounds(no_vacuum), std::invalid_argument);
    DecoyObservations no_weak = {obs[0], obs[2]};
    CHECK_THROWS_AS(decoy_bounds(no_weak), std::invalid_argument);

    DecoyObservations zero_signal = obs;
    for (auto& o : zero_signal) o.mu = 0.0;
    CHECK_THROWS_AS(decoy_bounds(zero_signal), std::invalid_argument);

    CHECK_THROWS_AS(decoy_bounds(obs, YieldBounds::Method::infinite_decoy_ideal),
                    std::invalid_argument);
}

TEST_CASE("a line that swallows single photons trips the suppression flag") {
    // Eve blocks every single photon and forwards multi-photon pulses into a
    // perfect detector: Q(mu) = y0 e^-mu + p_multi(mu), Y1 truly zero
    const double y0 = 1e-5;
    DecoyObservations obs(3);
    obs[0] = {"vacuum", 0.0, y0, 0.5, 0, 0, 0};
    obs[1] = {"decoy", 0.1, y0 * std::exp(-0.1) + p_multi(0.1), 0.02, 0, 0, 0};
    obs[2] = {"signal", 0.5, y0 * std::exp(-0.5) + p_multi(0.5), 0.02, 0, 0, 0};
    YieldBounds b = decoy_bounds(obs);
    CHECK(b.y1_lower == 0.0);
    CHECK(b.vacuous);
    CHECK(b.suppression);
    CHECK(b.e1_upper == 0.5);
}

TEST_CASE("an error rate below the dark floor clamps the error bound") {
    auto obs = model_observations(reference_params(), 0.1);
    obs[1].qber = 0.0;  // impossible given y0 > 0: forces a negative numerator
    YieldBounds b = decoy_bounds(obs);
    CHECK(b.e1_upper == 0.0);
    CHECK(b.vacuous);
    CHECK(b.y1_lower == doctest::Approx(kRefY1).epsilon(1e-12));
}

TEST_CASE("ideal bounds use the physical single-photon yield") {
    RateModelParams p = reference_params();
    YieldBounds b = ideal_yield_bounds(p);
    CHECK(b.method == YieldBounds::Method::infinite_decoy_ideal);
    CHECK(b.y1_lower == doctest::Approx(0.0100099).epsilon(1e-12));
    CHECK(b.e1_upper == doctest::Approx(0.010489615280871937).epsilon(1e-12));
}

TEST_CASE("secure rate evaluations at pinned points") {
    RateModelParams p;
    p.mu = 0.1;
    p.eta = 0.1;
    p.y0 = 1e-5;
    p.e_d = 0.01;
    p.f_ec = 1.22;
    p.q = 0.5;
    CHECK(gllp_rate(p) == doctest::Approx(0.0017596964707441779).epsilon(1e-12));
    CHECK(gllp_rate(p, ideal_yield_bounds(p)) ==
          doctest::Approx(0.0036469825238892993).epsilon(1e-12));

    RateModelParams r = reference_params();
    auto obs = model_observations(r, 0.1);
    CHECK(gllp_rate(r, decoy_bounds(obs)) ==
          doctest::Approx(0.0010685536821981058).epsilon(1e-12));
}

TEST_CASE("secure rate clamps to zero under hopeless noise") {
    RateModelParams p = reference_params();
    p.e_d = 0.25;
    CHECK(gllp_rate(p) == 0.0);
    RateModelParams dead;
    dead.mu = 0.0;
    dead.eta = 0.5;
    dead.y0 = 0.0;
    CHECK(gllp_rate(dead) == 0.0);
}

TEST_CASE("rate parameter validation") {
    RateModelParams p = reference_params();
    p.eta = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.e_d = 0.6;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.f_ec = 0.9;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.q = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.mu = -0.1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("rate mode names round trip") {
    for (RateMode m : {RateMode::nondecoy, RateMode::decoy_ideal, RateMode::decoy_two}) {
        auto back = rate_mode_from_string(to_string(m));
        REQUIRE(back.has_value());
        CHECK(*back == m);
    }
    CHECK_FALSE(rate_mode_from_string("bogus").has_value());
}

TEST_CASE("distance sweep fills an inclusive grid with dominating decoy rates") {
    SweepSpec spec;
    spec.distance_max_km = 10.0;
    spec.distance_step_km = 5.0;
    SweepResult res = sweep_rates(spec);
    REQUIRE(res.rows.size() == 3);
    CHECK(res.rows[0].distance_km == 0.0);
    CHECK(res.rows[2].distance_km == 10.0);
    for (const auto& row : res.rows) {
        CHECK(row.eta ==
              doctest::Approx(0.1 * std::pow(10.0, -0.21 * row.distance_km / 10.0)).epsilon(1e-12));
        CHECK(row.r_nondecoy > 0.0);
        CHECK(row.r_decoy_ideal >= row.r_nondecoy);
        CHECK(row.r_decoy_two > 0.0);
        CHECK(row.mu_opt > 0.0);
        CHECK(row.gain > 0.0);
    }
    CHECK_FALSE(res.cutoff_nondecoy_km.has_value());
    CHECK_FALSE(res.cutoff_decoy_ideal_km.has_value());
    CHECK_FALSE(res.cutoff_decoy_two_km.has_value());
    // rates fall with distance
    CHECK(res.rows[0].r_nondecoy > res.rows[1].r_nondecoy);
    CHECK(res.rows[1].r_nondecoy > res.rows[2].r_nondecoy);
}

TEST_CASE("the non-decoy mode dies at moderate distance") {
    SweepSpec spec;
    spec.distance_max_km = 50.0;
    spec.distance_step_km = 1.0;
    SweepResult res = sweep_rates(spec);
    REQUIRE(res.cutoff_nondecoy_km.has_value());
    CHECK(*res.cutoff_nondecoy_km >= 40.0);
    CHECK(*res.cutoff_nondecoy_km <= 50.0);
    CHECK_FALSE(res.cutoff_decoy_ideal_km.has_value());
    CHECK_FALSE(res.cutoff_decoy_two_km.has_value());
    std::size_t at = static_cast<std::size_t>(*res.cutoff_nondecoy_km);
    REQUIRE(at < res.rows.size());
    CHECK(res.rows[at].r_nondecoy == 0.0);
    CHECK(res.rows[at - 1].r_nondecoy > 0.0);
}

TEST_CASE("csv rendering pins the column contract") {
    SweepSpec spec;
    spec.distance_max_km = 2.0;
    spec.distance_step_km = 1.0;
    std::string csv = sweep_to_csv(sweep_rates(spec));
    std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header == "distance_km,eta,mu_opt,Q,E,R_nondecoy,R_decoy_ideal,R_decoy_two");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 4);  // header + three rows, trailing newline
    CHECK(csv.substr(csv.find('\n') + 1, 2) == "0,");
}

TEST_CASE("sweep specs validate their grid") {
    SweepSpec s;
    s.distance_step_km = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SweepSpec{};
    s.distance_min_km = 5.0;
    s.distance_max_km = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SweepSpec{};
    s.decoy_nu_fraction = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SweepSpec{};
    s.detector_efficiency = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

} // TEST_SUITE
