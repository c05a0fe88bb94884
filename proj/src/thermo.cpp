#include "distill/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace distill::thermo {

namespace {

constexpr double kBarToPa = 1.0e5;
constexpr double kLn10 = 2.302585092994046;
constexpr double kBracketMargin = 50.0;
constexpr double kResidualTol = 1e-8;
constexpr int kMaxIterations = 200;

void check_composition(std::span<const double> z, const char* what)
{
    double sum = 0.0;
    for (double v : z) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": negative or non-finite mole fraction");
        }
        sum += v;
    }
    if (sum == 0.0) {
        throw SolverError(std::string(what) + ": empty composition has no saturation temperature");
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << what << ": mole fractions sum to " << sum << ", expected 1";
        throw std::invalid_argument(msg.str());
    }
}

// Lowest temperature at which every present component has T + C > 0.
double antoine_floor(std::span<const Component> components, std::span<const double> z)
{
    double floor = 1.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (z[i] > 0.0) {
            floor = std::max(floor, -components[i].antoine_c + 1.0);
        }
    }
    return floor;
}

struct Bracket {
    double lo;
    double hi;
};

Bracket saturation_bracket(std::span<const Component> components, std::span<const double> z,
                           double pressure)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (z[i] > 0.0) {
            const double tb = boiling_point(components[i], pressure);
            lo = std::min(lo, tb);
            hi = std::max(hi, tb);
        }
    }
    if (!std::isfinite(lo)) {
        throw SolverError("saturation point: composition has no present component");
    }
    return {std::max(lo - kBracketMargin, antoine_floor(components, z)), hi + kBracketMargin};
}

// Safeguarded Newton on a monotone residual. `eval` returns {f, df/dT}.
template <typename Eval>
SaturationPoint solve_saturation(Eval eval, Bracket bracket, bool increasing, const char* what)
{
    auto [lo, hi] = bracket;
    const double f_lo = eval(lo).first;
    const double f_hi = eval(hi).first;
    const bool ok = increasing ? (f_lo <= 0.0 && f_hi >= 0.0) : (f_lo >= 0.0 && f_hi <= 0.0);
    if (!ok) {
        std::ostringstream msg;
        msg << what << ": no root in bracket [" << lo << ", " << hi << "] K";
        throw SolverError(msg.str());
    }

    double t = 0.5 * (lo + hi);
    for (int it = 1; it <= kMaxIterations; ++it) {
        auto [f, df] = eval(t);
        if (!std::isfinite(f)) {
            throw SolverError(std::string(what) + ": non-finite residual");
        }
        if (std::abs(f) < kResidualTol) {
            return {t, {}, it};
        }
        // keep the root bracketed
        if ((f < 0.0) == increasing) {
            lo = t;
        } else {
            hi = t;
        }
        double next = t - f / df;
        if (!(df != 0.0) || !(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo < 1e-13 * hi) {
            return {next, {}, it};
        }
        t = next;
    }
    throw SolverError(std::string(what) + ": iteration limit reached");
}

}  // namespace

void Component::validate() const
{
    auto fail = [this](const std::string& msg) {
        throw std::invalid_argument("component '" + name + "': " + msg);
    };
    if (!(antoine_b > 0.0)) fail("antoine_b must be positive");
    if (!(t_valid_min < t_valid_max)) fail("t_valid_min must be below t_valid_max");
    if (!(molar_mass > 0.0)) fail("molar_mass must be positive");
    if (!(latent_heat > 0.0)) fail("latent_heat must be positive");
    if (!(liquid_density > 0.0)) fail("liquid_density must be positive");
    if (!(t_valid_min + antoine_c > 0.0)) fail("Antoine form is singular inside the validity range");
}

double Stream::total_flow() const
{
    return std::accumulate(flows.begin(), flows.end(), 0.0);
}

std::vector<double> Stream::composition() const
{
    const double total = total_flow();
    if (!(total > 0.0)) {
        throw DegenerateStreamError("stream has zero total flow");
    }
    std::vector<double> z(flows.size());
    std::transform(flows.begin(), flows.end(), z.begin(), [total](double f) { return f / total; });
    return z;
}

void Stream::validate(std::size_t component_count) const
{
    if (flows.size() != component_count) {
        throw std::invalid_argument("stream: flow count does not match component count");
    }
    for (double f : flows) {
        if (!(f >= 0.0) || !std::isfinite(f)) {
            throw std::invalid_argument("stream: flows must be finite and non-negative");
        }
    }
    if (!(temperature > 0.0)) throw std::invalid_argument("stream: temperature must be positive");
    if (!(pressure > 0.0)) throw std::invalid_argument("stream: pressure must be positive");
}

const std::vector<Component>& component_library()
{
    // Antoine sets in log10(bar)/K form after the NIST WebBook compilations;
    // isopentane converted from the mmHg/degC form, propane A re-anchored at
    // its normal boiling point. Validity ranges span roughly the liquid range
    // up to the critical temperature.
    static const std::vector<Component> library = {
        {"ethane", 3.93835, 659.739, -16.719, 130.0, 305.0, 0.03007, 14690.0, 544.0},
        {"propane", 3.97090, 819.296, -24.417, 180.0, 370.0, 0.04410, 19040.0, 581.0},
        {"isobutane", 3.94417, 912.141, -29.808, 200.0, 408.0, 0.05812, 21300.0, 593.0},
        {"n-butane", 3.85002, 909.65, -36.146, 210.0, 425.0, 0.05812, 22440.0, 601.0},
        {"isopentane", 3.95805, 1040.73, -37.705, 230.0, 460.0, 0.07215, 24690.0, 616.0},
        {"n-pentane", 3.98920, 1070.617, -40.454, 230.0, 470.0, 0.07215, 25790.0, 626.0},
        {"benzene", 4.01814, 1203.835, -53.226, 280.0, 562.0, 0.07811, 30720.0, 876.0},
        {"toluene", 4.07827, 1343.943, -53.773, 280.0, 592.0, 0.09214, 33180.0, 867.0},
        {"p-xylene", 4.14553, 1474.403, -55.377, 290.0, 616.0, 0.10617, 35670.0, 861.0},
    };
    return library;
}

const Component& library_component(const std::string& name)
{
    for (const auto& c : component_library()) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no bundled component named '" + name + "'");
}

double psat_extrapolated(const Component& c, double temperature)
{
    return kBarToPa * std::pow(10.0, c.antoine_a - c.antoine_b / (temperature + c.antoine_c));
}

double dlnpsat_dt(const Component& c, double temperature)
{
    const double denom = temperature + c.antoine_c;
    return kLn10 * c.antoine_b / (denom * denom);
}

double psat(const Component& c, double temperature)
{
    if (!(temperature >= c.t_valid_min - kExtrapolationBand &&
          temperature <= c.t_valid_max + kExtrapolationBand)) {
        std::ostringstream msg;
        msg << "psat: temperature " << temperature << " K outside the range of '" << c.name << "' ["
            << c.t_valid_min - kExtrapolationBand << ", " << c.t_valid_max + kExtrapolationBand
            << "] K";
        throw RangeError(msg.str());
    }
    return psat_extrapolated(c, temperature);
}

double boiling_point(const Component& c, double pressure)
{
    return c.antoine_b / (c.antoine_a - std::log10(pressure / kBarToPa)) - c.antoine_c;
}

std::vector<double> k_values(std::span<const Component> components, double temperature,
                             double pressure)
{
    if (!(pressure > 0.0)) {
        throw std::invalid_argument("k_values: pressure must be positive");
    }
    std::vector<double> k(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        k[i] = psat(components[i], temperature) / pressure;
    }
    return k;
}

SaturationPoint bubble_point(std::span<const Component> components, std::span<const double> x,
                             double pressure)
{
    if (x.size() != components.size()) {
        throw std::invalid_argument("bubble_point: composition size mismatch");
    }
    check_composition(x, "bubble_point");
    auto eval = [&](double t) {
        double f = -1.0;
        double df = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) {
            if (x[i] > 0.0) {
                const double kx = psat_extrapolated(components[i], t) / pressure * x[i];
                f += kx;
                df += kx * dlnpsat_dt(components[i], t);
            }
        }
        return std::pair{f, df};
    };
    SaturationPoint result = solve_saturation(eval, saturation_bracket(components, x, pressure),
                                              true, "bubble_point");
    result.composition.resize(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        result.composition[i] =
            x[i] > 0.0 ? psat_extrapolated(components[i], result.temperature) / pressure * x[i] : 0.0;
    }
    return result;
}

SaturationPoint dew_point(std::span<const Component> components, std::span<const double> y,
                          double pressure)
{
    if (y.size() != components.size()) {
        throw std::invalid_argument("dew_point: composition size mismatch");
    }
    check_composition(y, "dew_point");
    auto eval = [&](double t) {
        double g = -1.0;
        double dg = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) {
            if (y[i] > 0.0) {
                const double yk = y[i] * pressure / psat_extrapolated(components[i], t);
                g += yk;
                dg -= yk * dlnpsat_dt(components[i], t);
            }
        }
        return std::pair{g, dg};
    };
    SaturationPoint result =
        solve_saturation(eval, saturation_bracket(components, y, pressure), false, "dew_point");
    result.composition.resize(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        result.composition[i] =
            y[i] > 0.0 ? y[i] * pressure / psat_extrapolated(components[i], result.temperature) : 0.0;
    }
    return result;
}

FlashResult flash_with_k(std::span<const double> z, std::span<const double> k)
{
    if (z.size() != k.size()) {
        throw std::invalid_argument("flash: composition and K-value sizes differ");
    }
    check_composition(z, "flash");
    const std::size_t n = z.size();
    FlashResult out;
    out.x.assign(n, 0.0);
    out.y.assign(n, 0.0);

    double sum_kz = 0.0;
    double sum_z_over_k = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_kz += k[i] * z[i];
        sum_z_over_k += z[i] / k[i];
    }

    if (sum_kz <= 1.0) {
        out.liquid_fraction = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            out.x[i] = z[i];
            out.y[i] = k[i] * z[i] / sum_kz;
        }
        return out;
    }
    if (sum_z_over_k <= 1.0) {
        out.liquid_fraction = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out.y[i] = z[i];
            out.x[i] = z[i] / k[i] / sum_z_over_k;
        }
        return out;
    }

    // Rachford-Rice residual is strictly decreasing in the vapor fraction.
    auto rr = [&](double psi) {
        double h = 0.0;
        double dh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double km1 = k[i] - 1.0;
            const double denom = 1.0 + psi * km1;
            h += z[i] * km1 / denom;
            dh -= z[i] * km1 * km1 / (denom * denom);
        }
        return std::pair{h, dh};
    };
    double lo = 0.0;
    double hi = 1.0;
    double psi = 0.5;
    for (int it = 0; it < kMaxIterations; ++it) {
        auto [h, dh] = rr(psi);
        if (std::abs(h) < 1e-10) break;
        if (h > 0.0) {
            lo = psi;
        } else {
            hi = psi;
        }
        double next = psi - h / dh;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo < 1e-15) break;
        psi = next;
    }
    out.liquid_fraction = 1.0 - psi;
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = z[i] / (1.0 + psi * (k[i] - 1.0));
        out.y[i] = k[i] * out.x[i];
    }
    return out;
}

FlashResult flash_feed(std::span<const Component> components, std::span<const double> z,
                       double temperature, double pressure)
{
    if (z.size() != components.size()) {
        throw std::invalid_argument("flash_feed: composition size mismatch");
    }
    std::vector<double> k(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        k[i] = psat_extrapolated(components[i], temperature) / pressure;
    }
    return flash_with_k(z, k);
}

MixtureProperties mixture_properties(std::span<const Component> components, const Stream& stream,
                                     Phase phase)
{
    if (stream.flows.size() != components.size()) {
        throw std::invalid_argument("mixture_properties: stream/component size mismatch");
    }
    const std::vector<double> z = stream.composition();
    MixtureProperties props;
    double molar_volume = 0.0;  // m3/mol, ideal liquid mixing
    for (std::size_t i = 0; i < z.size(); ++i) {
        props.molar_mass += z[i] * components[i].molar_mass;
        props.latent_heat += z[i] * components[i].latent_heat;
        molar_volume += z[i] * components[i].molar_mass / components[i].liquid_density;
    }
    if (phase == Phase::liquid) {
        props.density = props.molar_mass / molar_volume;
    } else {
        props.density = stream.pressure * props.molar_mass / (kGasConstant * stream.temperature);
    }
    return props;
}

}  // namespace distill::thermo
