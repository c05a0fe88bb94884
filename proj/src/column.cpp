#include "distill/column.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace distill::column {

void ColumnSpec::validate() const
{
    if (!(pressure > 0.0)) throw std::invalid_argument("column spec: pressure must be positive");
    if (n_stages < 3) throw std::invalid_argument("column spec: at least 3 stages required");
    if (!(reflux_ratio > 0.0)) throw std::invalid_argument("column spec: reflux ratio must be positive");
    if (!(boilup_ratio > 0.0)) throw std::invalid_argument("column spec: boilup ratio must be positive");
}

SectionFlows derive_flows(double total_feed, double q, double reflux_ratio, double boilup_ratio)
{
    SectionFlows f;
    f.distillate = total_feed * (boilup_ratio + 1.0 - q) / (reflux_ratio + boilup_ratio + 1.0);
    f.bottoms = total_feed - f.distillate;
    f.reflux = reflux_ratio * f.distillate;
    f.vapor_top = (reflux_ratio + 1.0) * f.distillate;
    f.liquid_bottom = f.reflux + q * total_feed;
    f.vapor_bottom = boilup_ratio * f.bottoms;
    return f;
}

std::vector<double> thomas_solve(std::span<const double> lower, std::span<const double> diagonal,
                                 std::span<const double> upper, std::span<const double> rhs)
{
    const std::size_t n = diagonal.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw std::invalid_argument("thomas_solve: coefficient sequences must share a nonzero length");
    }
    std::vector<double> c(n);
    std::vector<double> x(n);
    double pivot = diagonal[0];
    if (pivot == 0.0) throw SingularSystemError("thomas_solve: zero pivot in row 0");
    c[0] = upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diagonal[i] - lower[i] * c[i - 1];
        if (pivot == 0.0) {
            throw SingularSystemError("thomas_solve: zero pivot in row " + std::to_string(i));
        }
        c[i] = i + 1 < n ? upper[i] / pivot : 0.0;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] -= c[i] * x[i + 1];
    }
    return x;
}

StageSystem assemble_component_system(int n_stages, double reflux_ratio,
                                      std::span<const double> stripping, double feed_flow)
{
    const std::size_t n = static_cast<std::size_t>(n_stages) + 2;
    const std::size_t f = static_cast<std::size_t>(feed_tray(n_stages));
    StageSystem sys{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                    std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};

    // total condenser: vapor from tray 1 = reflux + distillate = l0 (1 + 1/R)
    sys.diagonal[0] = 1.0 + 1.0 / reflux_ratio;
    sys.upper[0] = -stripping[1];
    // trays and reboiler: l_{j-1} + S_{j+1} l_{j+1} + f_j = (1 + S_j) l_j
    for (std::size_t j = 1; j < n; ++j) {
        sys.lower[j] = -1.0;
        sys.diagonal[j] = 1.0 + stripping[j];
        sys.upper[j] = j + 1 < n ? -stripping[j + 1] : 0.0;
    }
    sys.rhs[f] = feed_flow;
    return sys;
}

namespace {

constexpr double kMaxExtrapolation = 5.0;  // K per jump

ColumnResult failed(ColumnResult result, std::string why)
{
    result.converged = false;
    result.failure = std::move(why);
    return result;
}

}  // namespace

ColumnResult solve_column(std::span<const thermo::Component> components, const thermo::Stream& feed,
                          const ColumnSpec& spec, const SolverOptions& options)
{
    spec.validate();
    feed.validate(components.size());
    const double total_feed = feed.total_flow();
    if (!(total_feed > 0.0)) {
        throw thermo::DegenerateStreamError("solve_column: feed has zero total flow");
    }

    const std::size_t nc = components.size();
    const int n_trays = spec.n_stages;
    const std::size_t n = static_cast<std::size_t>(n_trays) + 2;
    const std::size_t ftray = static_cast<std::size_t>(feed_tray(n_trays));
    const double pressure = spec.pressure;
    const std::vector<double> z = feed.composition();

    ColumnResult result;
    result.distillate.temperature = result.bottoms.temperature = feed.temperature;
    result.distillate.pressure = result.bottoms.pressure = pressure;
    result.distillate.flows.assign(nc, 0.0);
    result.bottoms.flows.assign(nc, 0.0);

    std::vector<double> temps(n);
    try {
        const auto flash = thermo::flash_feed(components, z, feed.temperature, pressure);
        result.feed_liquid_fraction = flash.liquid_fraction;
        result.flows =
            derive_flows(total_feed, flash.liquid_fraction, spec.reflux_ratio, spec.boilup_ratio);

        const double t_bubble = thermo::bubble_point(components, z, pressure).temperature;
        const double t_dew = thermo::dew_point(components, z, pressure).temperature;
        for (std::size_t j = 0; j < n; ++j) {
            temps[j] = t_bubble + (t_dew - t_bubble) * static_cast<double>(j) / static_cast<double>(n - 1);
        }
    } catch (const std::exception& e) {
        result.stage_temperatures = temps;
        return failed(std::move(result), e.what());
    }

    const SectionFlows& fl = result.flows;
    // V_j / L_j by stage; the reboiler ratio is V'/B
    std::vector<double> vl_ratio(n, 0.0);
    for (std::size_t j = 1; j <= static_cast<std::size_t>(n_trays); ++j) {
        if (j < ftray) {
            vl_ratio[j] = fl.vapor_top / fl.reflux;
        } else if (j == ftray) {
            vl_ratio[j] = fl.vapor_top / fl.liquid_bottom;
        } else {
            vl_ratio[j] = fl.vapor_bottom / fl.liquid_bottom;
        }
    }
    vl_ratio[n - 1] = fl.vapor_bottom / fl.bottoms;

    std::vector<std::vector<double>> liquid(nc, std::vector<double>(n, 0.0));
    std::vector<double> stripping(n, 0.0);
    std::vector<double> x(nc);
    std::vector<double> step(n, 0.0), previous_step(n, 0.0);
    int aligned_sweeps = 0;

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        result.iterations = sweep;
        for (std::size_t i = 0; i < nc; ++i) {
            for (std::size_t j = 1; j < n; ++j) {
                stripping[j] =
                    thermo::psat_extrapolated(components[i], temps[j]) / pressure * vl_ratio[j];
            }
            const StageSystem sys =
                assemble_component_system(n_trays, spec.reflux_ratio, stripping, feed.flows[i]);
            try {
                liquid[i] = thomas_solve(sys.lower, sys.diagonal, sys.upper, sys.rhs);
            } catch (const SingularSystemError& e) {
                result.stage_temperatures = temps;
                return failed(std::move(result), e.what());
            }
            for (double v : liquid[i]) {
                if (!std::isfinite(v)) {
                    result.stage_temperatures = temps;
                    return failed(std::move(result), "non-finite liquid flow during iteration");
                }
            }
        }

        double max_change = 0.0;
        try {
            for (std::size_t j = 0; j < n; ++j) {
                double sum = 0.0;
                for (std::size_t i = 0; i < nc; ++i) {
                    x[i] = std::max(liquid[i][j], 0.0);
                    sum += x[i];
                }
                if (!(sum > 0.0)) {
                    throw thermo::SolverError("stage " + std::to_string(j) + " has no liquid");
                }
                for (double& v : x) v /= sum;
                const double t_new = thermo::bubble_point(components, x, pressure).temperature;
                step[j] = t_new - temps[j];
                max_change = std::max(max_change, std::abs(step[j]));
                temps[j] = t_new;
            }
        } catch (const std::exception& e) {
            result.stage_temperatures = temps;
            return failed(std::move(result), e.what());
        }
        result.max_temperature_change = max_change;
        if (max_change < options.temperature_tolerance) {
            result.converged = true;
            break;
        }

        // Slow monotone drift of the profile (typical at high reflux) is a
        // geometric sequence; jump to its limit once it is clearly established.
        double dot = 0.0, prev_norm = 0.0, norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dot += step[j] * previous_step[j];
            prev_norm += previous_step[j] * previous_step[j];
            norm += step[j] * step[j];
        }
        const double ratio = prev_norm > 0.0 ? dot / prev_norm : 0.0;
        const bool aligned = prev_norm > 0.0 && dot > 0.995 * std::sqrt(norm * prev_norm) && ratio > 0.3 &&
                             ratio < 1.05;
        aligned_sweeps = aligned ? aligned_sweeps + 1 : 0;
        previous_step = step;
        if (aligned_sweeps >= 3) {
            const double limit = kMaxExtrapolation / max_change;
            const double gain = ratio < 1.0 ? std::min(ratio / (1.0 - ratio), limit) : limit;
            for (std::size_t j = 0; j < n; ++j) temps[j] += gain * step[j];
            aligned_sweeps = 0;
            std::fill(previous_step.begin(), previous_step.end(), 0.0);
        }
    }

    result.stage_temperatures = temps;
    for (std::size_t i = 0; i < nc; ++i) {
        const double d = liquid[i][0] / spec.reflux_ratio;
        const double b = liquid[i][n - 1];
        if (d < -1e-9 || b < -1e-9) {
            return failed(std::move(result), "negative product flow after convergence");
        }
        result.distillate.flows[i] = std::max(d, 0.0);
        result.bottoms.flows[i] = std::max(b, 0.0);
    }
    result.distillate.temperature = temps.front();
    result.bottoms.temperature = temps.back();

    const double lambda_top = result.distillate.total_flow() > 0.0
        ? thermo::mixture_properties(components, result.distillate, thermo::Phase::liquid).latent_heat
        : 0.0;
    const double lambda_bottom = result.bottoms.total_flow() > 0.0
        ? thermo::mixture_properties(components, result.bottoms, thermo::Phase::liquid).latent_heat
        : 0.0;
    result.condenser_duty = fl.vapor_top * lambda_top;
    result.reboiler_duty = fl.vapor_bottom * lambda_bottom;
    result.max_vapor_flow = std::max(fl.vapor_top, fl.vapor_bottom);
    return result;
}

}  // namespace distill::column
