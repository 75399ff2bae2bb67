#include "qkd/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qkd::keyrate {

double p_multi(double mu) {
    if (mu < 0.0 || !std::isfinite(mu))
        throw std::invalid_argument("p_multi: mean must be non-negative");
    if (mu < 1e-4) {
        // series: mu^2/2 - mu^3/3 + mu^4/8, avoids cancellation
        return mu * mu * (0.5 - mu / 3.0 + mu * mu / 8.0);
    }
    return 1.0 - (1.0 + mu) * std::exp(-mu);
}

double p_rec(double mu, double eta) {
    if (mu < 0.0 || eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("p_rec: mu >= 0 and eta in [0,1] required");
    return -std::expm1(-mu * eta);
}

double p_rec_printed_variant(double mu, double eta) {
    if (mu < 0.0 || eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("p_rec_printed_variant: mu >= 0 and eta in [0,1] required");
    double x = mu * eta;
    return 1.0 - x * std::exp(-x);
}

double approx_rate(double mu, double eta, bool printed_prec_variant) {
    double rec = printed_prec_variant ? p_rec_printed_variant(mu, eta) : p_rec(mu, eta);
    return rec - p_multi(mu);
}

double maximize_scalar(const std::function<double(double)>& f, double lo, double hi,
                       int scan_points, int refine_iters) {
    if (!(hi > lo)) throw std::invalid_argument("maximize_scalar: empty interval");
    if (scan_points < 3) scan_points = 3;

    double best_x = lo, best_v = f(lo);
    for (int i = 1; i < scan_points; ++i) {
        double x = lo + (hi - lo) * i / (scan_points - 1);
        double v = f(x);
        if (v > best_v) { best_v = v; best_x = x; }
    }
    double step = (hi - lo) / (scan_points - 1);
    double a = std::max(lo, best_x - step);
    double b = std::min(hi, best_x + step);

    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < refine_iters; ++i) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    double xm = 0.5 * (a + b);
    double vm = f(xm);
    return vm >= best_v ? xm : best_x;
}

namespace {

// scan on a log grid first; rate optima in mu scale with eta and can sit
// orders of magnitude below the interval width
double maximize_log_scalar(const std::function<double(double)>& f, double lo, double hi,
                           int scan_points = 400) {
    double llo = std::log(lo), lhi = std::log(hi);
    double best_x = lo, best_v = f(lo);
    for (int i = 1; i < scan_points; ++i) {
        double x = std::exp(llo + (lhi - llo) * i / (scan_points - 1));
        double v = f(x);
        if (v > best_v) { best_v = v; best_x = x; }
    }
    double lstep = (lhi - llo) / (scan_points - 1);
    double a = std::exp(std::max(llo, std::log(best_x) - lstep));
    double b = std::exp(std::min(lhi, std::log(best_x) + lstep));

    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < 110; ++i) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    double xm = 0.5 * (a + b);
    return f(xm) >= best_v ? xm : best_x;
}

} // namespace

MuOpt optimize_mu(double eta, bool printed_prec_variant) {
    if (!(eta > 0.0) || eta > 1.0)
        throw std::invalid_argument("optimize_mu: eta outside (0, 1]");
    auto obj = [&](double mu) { return approx_rate(mu, eta, printed_prec_variant); };
    double mu = maximize_log_scalar(obj, 1e-8, 3.0, 600);
    return MuOpt{mu, obj(mu)};
}

double binary_entropy(double x) {
    if (!(x >= 0.0) || x > 1.0)
        throw std::invalid_argument("binary_entropy: argument outside [0, 1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double single_photon_rate(double e) { return 1.0 - 2.0 * binary_entropy(e); }

double single_photon_error_threshold() {
    // 1 - 2 H2(e) falls monotonically through zero on (0, 1/2)
    double lo = 1e-9, hi = 0.5 - 1e-9;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (single_photon_rate(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void RateModelParams::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("rate: mu must be non-negative");
    if (!(eta > 0.0) || eta > 1.0)
        throw std::invalid_argument("rate: eta outside (0, 1]");
    if (!(y0 >= 0.0) || y0 >= 1.0)
        throw std::invalid_argument("rate: y0 outside [0, 1)");
    if (!(e_d >= 0.0) || e_d > 0.5)
        throw std::invalid_argument("rate: e_d outside [0, 0.5]");
    if (!(f_ec >= 1.0))
        throw std::invalid_argument("rate: f_ec must be at least 1");
    if (!(q > 0.0) || q > 1.0)
        throw std::invalid_argument("rate: q outside (0, 1]");
}

GainQber model_gain_qber(const RateModelParams& p) {
    p.validate();
    GainQber out;
    double absorbed = std::exp(-p.eta * p.mu);  // no photon reaches the detector
    out.gain = 1.0 - (1.0 - p.y0) * absorbed;
    if (out.gain <= 0.0) {
        out.gain = 0.0;
        return out;
    }
    double eq = 0.5 * p.y0 + p.e_d * (-std::expm1(-p.eta * p.mu));
    out.qber = std::min(0.5, eq / out.gain);
    out.qber_defined = true;
    return out;
}

namespace {

struct Roles {
    const IntensityObservation* vacuum = nullptr;
    const IntensityObservation* weak = nullptr;
    const IntensityObservation* signal = nullptr;
};

Roles identify_roles(const DecoyObservations& obs) {
    Roles r;
    for (const auto& o : obs) {
        if (o.label == "signal") r.signal = &o;
    }
    if (!r.signal) {
        for (const auto& o : obs)
            if (!r.signal || o.mu > r.signal->mu) r.signal = &o;
    }
    if (!r.signal || !(r.signal->mu > 0.0))
        throw std::invalid_argument("decoy_bounds: signal intensity with mu > 0 required");
    for (const auto& o : obs) {
        if (&o == r.signal) continue;
        if (o.mu == 0.0 && !r.vacuum) r.vacuum = &o;
    }
    if (!r.vacuum)
        throw std::invalid_argument("decoy_bounds: vacuum intensity (mu == 0) required");
    for (const auto& o : obs) {
        if (&o == r.signal || &o == r.vacuum) continue;
        if (o.mu > 0.0 && o.mu < r.signal->mu && (!r.weak || o.mu > r.weak->mu)) r.weak = &o;
    }
    if (!r.weak)
        throw std::invalid_argument("decoy_bounds: weak decoy with 0 < nu < mu required");
    return r;
}

struct Vec2 {
    double x = 0.0, y = 0.0;
};

// minimal Y1 consistent with the three observed gains, yields free in [0,1]
// per photon number up to a cutoff, Poisson tails allowed full slack
double lp_min_y1(double mu, double nu, double y0, double gain_mu, double gain_nu) {
    constexpr int n_max = 25;
    auto pmf = [](double m, int n) {
        if (m == 0.0) return n == 0 ? 1.0 : 0.0;
        return std::exp(-m + n * std::log(m) - std::lgamma(n + 1.0));
    };

    Vec2 g1{pmf(nu, 1), pmf(mu, 1)};
    std::vector<Vec2> rest;
    double tail_nu = 1.0 - pmf(nu, 0), tail_mu = 1.0 - pmf(mu, 0);
    for (int n = 2; n <= n_max; ++n) {
        rest.push_back({pmf(nu, n), pmf(mu, n)});
    }
    tail_nu -= g1.x;
    tail_mu -= g1.y;
    for (const auto& g : rest) {
        tail_nu -= g.x;
        tail_mu -= g.y;
    }
    rest.push_back({std::max(0.0, tail_nu), 0.0});
    rest.push_back({0.0, std::max(0.0, tail_mu)});

    // H-representation of the multi-photon zonotope: every facet of a planar
    // zonotope is parallel to one of its generators, so the support
    // inequalities along generator normals are a complete membership test;
    // the generator directions themselves are added to cover the degenerate
    // near-parallel case
    struct HalfPlane {
        double dx, dy, support;
    };
    std::vector<HalfPlane> faces;
    for (const auto& g : rest) {
        double norm = std::hypot(g.x, g.y);
        if (norm < 1e-300) continue;
        const Vec2 candidates[] = {{-g.y / norm, g.x / norm}, {g.x / norm, g.y / norm}};
        for (const auto& d : candidates) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                double dx = d.x * sgn, dy = d.y * sgn;
                double support = 0.0;
                for (const auto& h : rest) support += std::max(0.0, dx * h.x + dy * h.y);
                faces.push_back({dx, dy, support});
            }
        }
    }

    Vec2 c{gain_nu - pmf(nu, 0) * y0, gain_mu - pmf(mu, 0) * y0};
    double tol = 1e-13 * (1.0 + std::abs(c.x) + std::abs(c.y));

    // worst constraint violation at a trial Y1; a max of affine functions of
    // t, so convex in t, which makes the feasible set an interval
    auto violation = [&](double t) {
        double vx = c.x - t * g1.x, vy = c.y - t * g1.y;
        double worst = -1.0;
        for (const auto& f : faces)
            worst = std::max(worst, f.dx * vx + f.dy * vy - f.support);
        return worst;
    };
    auto feasible = [&](double t) { return violation(t) <= tol; };
    if (feasible(0.0)) return 0.0;

    // golden-section descent on the convex violation finds a feasible point
    // whenever one exists, however narrow the interval
    constexpr double invphi = 0.6180339887498949;
    double a = 0.0, b = 1.0;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = violation(x1), f2 = violation(x2);
    for (int i = 0; i < 200; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = violation(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = violation(x2);
        }
    }
    double t_feasible = f1 < f2 ? x1 : x2;
    if (!feasible(t_feasible)) return 0.0;  // observations outside the model class

    double lo = 0.0, hi = t_feasible;  // infeasible at lo, feasible at hi
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
}

} // namespace

YieldBounds decoy_bounds(const DecoyObservations& obs, YieldBounds::Method method) {
    if (method == YieldBounds::Method::infinite_decoy_ideal)
        throw std::invalid_argument("decoy_bounds: the ideal method needs model parameters, "
                                    "use ideal_yield_bounds");
    Roles roles = identify_roles(obs);
    double mu = roles.signal->mu;
    double nu = roles.weak->mu;
    double y0 = roles.vacuum->gain;

    YieldBounds out;
    out.method = method;

    double qm_em = roles.signal->gain * std::exp(mu);
    double qn_en = roles.weak->gain * std::exp(nu);

    double y1;
    if (method == YieldBounds::Method::lp_oracle) {
        y1 = lp_min_y1(mu, nu, y0, roles.signal->gain, roles.weak->gain);
    } else {
        y1 = (mu / (mu * nu - nu * nu)) *
             (qn_en - (nu * nu) / (mu * mu) * qm_em - ((mu * mu - nu * nu) / (mu * mu)) * y0);
    }
    if (y1 < 0.0) {
        y1 = 0.0;
        out.vacuous = true;
    }
    if (y1 > 1.0) y1 = 1.0;
    out.y1_lower = y1;

    if (y1 > 0.0) {
        double e1 = (roles.weak->qber * qn_en - 0.5 * y0) / (nu * y1);
        if (e1 < 0.0) {
            e1 = 0.0;
            out.vacuous = true;
        }
        out.e1_upper = std::min(0.5, e1);
    } else {
        out.e1_upper = 0.5;
    }

    // single-photon yield implied by the weak decoy alone, used as the
    // suppression reference; a photon-number-splitting line shows up as the
    // bound collapsing far below it
    double reference = (qn_en - y0) / nu;
    out.suppression = reference > 0.0 && out.y1_lower < 0.5 * reference;
    return out;
}

YieldBounds ideal_yield_bounds(const RateModelParams& p) {
    p.validate();
    YieldBounds out;
    out.method = YieldBounds::Method::infinite_decoy_ideal;
    out.y1_lower = p.y0 + p.eta * (1.0 - p.y0);
    out.e1_upper = out.y1_lower > 0.0
                       ? std::min(0.5, (0.5 * p.y0 + p.e_d * p.eta) / out.y1_lower)
                       : 0.5;
    return out;
}

DecoyObservations model_observations(const RateModelParams& signal_params, double nu) {
    if (!(nu > 0.0) || nu >= signal_params.mu)
        throw std::invalid_argument("model_observations: 0 < nu < mu required");
    DecoyObservations obs;
    const struct { const char* label; double mu; } rows[] = {
        {"vacuum", 0.0}, {"decoy", nu}, {"signal", signal_params.mu}};
    for (const auto& row : rows) {
        RateModelParams p = signal_params;
        p.mu = row.mu;
        GainQber gq = model_gain_qber(p);
        IntensityObservation o;
        o.label = row.label;
        o.mu = row.mu;
        o.gain = gq.gain;
        o.qber = gq.qber_defined ? gq.qber : 0.5;
        obs.push_back(std::move(o));
    }
    return obs;
}

double gllp_rate(const RateModelParams& p, const std::optional<YieldBounds>& bounds) {
    GainQber gq = model_gain_qber(p);
    if (!gq.qber_defined) return 0.0;

    double q1, e1;
    if (bounds) {
        q1 = bounds->y1_lower * p.mu * std::exp(-p.mu);
        e1 = std::clamp(bounds->e1_upper, 0.0, 0.5);
    } else {
        q1 = std::max(0.0, gq.gain - p_multi(p.mu));
        e1 = q1 > 0.0 ? std::min(0.5, gq.qber * gq.gain / q1) : 0.5;
    }
    double r = p.q * (-gq.gain * p.f_ec * binary_entropy(gq.qber) + q1 * (1.0 - binary_entropy(e1)));
    return std::max(0.0, r);
}

std::string to_string(RateMode m) {
    switch (m) {
        case RateMode::nondecoy: return "nondecoy";
        case RateMode::decoy_ideal: return "decoy-ideal";
        case RateMode::decoy_two: return "decoy-two";
    }
    return "nondecoy";
}

std::optional<RateMode> rate_mode_from_string(const std::string& s) {
    if (s == "nondecoy") return RateMode::nondecoy;
    if (s == "decoy-ideal") return RateMode::decoy_ideal;
    if (s == "decoy-two") return RateMode::decoy_two;
    return std::nullopt;
}

void SweepSpec::validate() const {
    if (!(distance_step_km > 0.0))
        throw std::invalid_argument("sweep: distance_step_km must be positive");
    if (!(distance_max_km >= distance_min_km) || distance_min_km < 0.0)
        throw std::invalid_argument("sweep: distance range invalid");
    if (!(detector_efficiency > 0.0) || detector_efficiency > 1.0)
        throw std::invalid_argument("sweep: detector_efficiency outside (0, 1]");
    if (!(attenuation_db_per_km >= 0.0))
        throw std::invalid_argument("sweep: attenuation_db_per_km must be non-negative");
    if (!(decoy_nu_fraction > 0.0) || decoy_nu_fraction >= 1.0)
        throw std::invalid_argument("sweep: decoy_nu_fraction outside (0, 1)");
}

SweepResult sweep_rates(const SweepSpec& spec) {
    spec.validate();
    SweepResult result;

    const double mu_lo = 1e-7, mu_hi = 2.0;
    for (double d = spec.distance_min_km; d <= spec.distance_max_km + 1e-9;
         d += spec.distance_step_km) {
        RateModelParams base;
        base.eta = spec.detector_efficiency *
                   std::pow(10.0, -spec.attenuation_db_per_km * d / 10.0);
        base.y0 = spec.y0;
        base.e_d = spec.e_d;
        base.f_ec = spec.f_ec;
        base.q = spec.q;

        auto rate_for = [&](RateMode mode, double mu) {
            RateModelParams p = base;
            p.mu = mu;
            switch (mode) {
                case RateMode::nondecoy:
                    return gllp_rate(p);
                case RateMode::decoy_ideal:
                    return gllp_rate(p, ideal_yield_bounds(p));
                case RateMode::decoy_two: {
                    auto obs = model_observations(p, spec.decoy_nu_fraction * mu);
                    return gllp_rate(p, decoy_bounds(obs));
                }
            }
            return 0.0;
        };

        SweepRow row;
        row.distance_km = d;
        row.eta = base.eta;
        for (RateMode mode : {RateMode::nondecoy, RateMode::decoy_ideal, RateMode::decoy_two}) {
            auto obj = [&](double mu) { return rate_for(mode, mu); };
            double mu_best = maximize_log_scalar(obj, mu_lo, mu_hi, 320);
            double r_best = obj(mu_best);
            switch (mode) {
                case RateMode::nondecoy: row.r_nondecoy = r_best; break;
                case RateMode::decoy_ideal: row.r_decoy_ideal = r_best; break;
                case RateMode::decoy_two: row.r_decoy_two = r_best; break;
            }
            if (mode == spec.report_mode) {
                RateModelParams p = base;
                p.mu = mu_best;
                GainQber gq = model_gain_qber(p);
                row.mu_opt = mu_best;
                row.gain = gq.gain;
                row.qber = gq.qber_defined ? gq.qber : 0.0;
            }
        }
        result.rows.push_back(row);

        if (!result.cutoff_nondecoy_km && row.r_nondecoy <= 0.0)
            result.cutoff_nondecoy_km = d;
        if (!result.cutoff_decoy_ideal_km && row.r_decoy_ideal <= 0.0)
            result.cutoff_decoy_ideal_km = d;
        if (!result.cutoff_decoy_two_km && row.r_decoy_two <= 0.0)
            result.cutoff_decoy_two_km = d;
    }
    return result;
}

std::string sweep_to_csv(const SweepResult& result) {
    std::string out = "distance_km,eta,mu_opt,Q,E,R_nondecoy,R_decoy_ideal,R_decoy_two\n";
    char line[512];
    for (const auto& r : result.rows) {
        std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      r.distance_km, r.eta, r.mu_opt, r.gain, r.qber, r.r_nondecoy,
                      r.r_decoy_ideal, r.r_decoy_two);
        out += line;
    }
    return out;
}

} // namespace qkd::keyrate
