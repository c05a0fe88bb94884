#include "distill/economics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace distill::economics {

void EconomicParams::validate() const
{
    const double values[] = {annual_hours,      payback_years,      heating_cost,
                             cooling_cost,      souders_brown_c,    tray_spacing,
                             height_allowance,  condenser_u,        reboiler_u,
                             cooling_water_in,  cooling_water_out,  reboiler_approach,
                             shell_coeff,       shell_diameter_exp, shell_height_exp,
                             tray_coeff,        tray_diameter_exp,  hx_coeff,
                             hx_area_exp};
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("economics: all parameters must be finite and positive");
        }
    }
    if (!(cooling_water_out > cooling_water_in)) {
        throw std::invalid_argument("economics: cooling_water_out must exceed cooling_water_in");
    }
}

void ProductPricing::validate(std::size_t component_count) const
{
    if (!(purity_spec > 0.0 && purity_spec < 1.0)) {
        throw std::invalid_argument("pricing: purity_spec must lie in (0, 1)");
    }
    if (prices.size() != component_count) {
        throw std::invalid_argument("pricing: one price per component required");
    }
    for (double p : prices) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("pricing: prices must be finite and non-negative");
        }
    }
}

ColumnSize size_column(std::span<const thermo::Component> components,
                       const column::ColumnResult& result, const column::ColumnSpec& spec,
                       const EconomicParams& params)
{
    thermo::Stream bottom = result.bottoms;
    bottom.temperature = result.stage_temperatures.empty() ? result.bottoms.temperature
                                                           : result.stage_temperatures.back();
    bottom.pressure = spec.pressure;
    const auto vapor = thermo::mixture_properties(components, bottom, thermo::Phase::vapor);
    const auto liquid = thermo::mixture_properties(components, bottom, thermo::Phase::liquid);
    if (!(vapor.density < liquid.density)) {
        std::ostringstream msg;
        msg << "size_column: vapor density " << vapor.density << " kg/m3 is not below liquid density "
            << liquid.density << " kg/m3";
        throw SizingError(msg.str());
    }
    const double flooding_velocity =
        params.souders_brown_c * std::sqrt((liquid.density - vapor.density) / vapor.density);
    const double volumetric_flow = result.max_vapor_flow * vapor.molar_mass / vapor.density;
    ColumnSize size;
    size.diameter = std::sqrt(4.0 * volumetric_flow / (std::numbers::pi * flooding_velocity));
    size.height = params.tray_spacing * spec.n_stages + params.height_allowance;
    return size;
}

double condenser_lmtd(double condenser_temperature, const EconomicParams& params)
{
    if (!(condenser_temperature > params.cooling_water_out)) {
        std::ostringstream msg;
        msg << "condenser at " << condenser_temperature
            << " K cannot reject heat to cooling water leaving at " << params.cooling_water_out << " K";
        throw UtilityError(msg.str());
    }
    const double dt_in = condenser_temperature - params.cooling_water_in;
    const double dt_out = condenser_temperature - params.cooling_water_out;
    return (dt_in - dt_out) / std::log(dt_in / dt_out);
}

CostBreakdown cost_breakdown(const CostBasis& basis, const EconomicParams& params)
{
    CostBreakdown cost;
    cost.condenser_area =
        basis.condenser_duty / (params.condenser_u * condenser_lmtd(basis.condenser_temperature, params));
    cost.reboiler_area = basis.reboiler_duty / (params.reboiler_u * params.reboiler_approach);

    const double shell = params.shell_coeff * std::pow(basis.diameter, params.shell_diameter_exp) *
                         std::pow(basis.height, params.shell_height_exp);
    const double trays =
        params.tray_coeff * std::pow(basis.diameter, params.tray_diameter_exp) * basis.n_stages;
    const double exchangers = params.hx_coeff * (std::pow(cost.condenser_area, params.hx_area_exp) +
                                                 std::pow(cost.reboiler_area, params.hx_area_exp));
    cost.capital = shell + trays + exchangers;

    constexpr double kSecondsPerHour = 3600.0;
    constexpr double kJoulesPerGJ = 1.0e9;
    cost.operating = (basis.reboiler_duty * params.heating_cost + basis.condenser_duty * params.cooling_cost) *
                     params.annual_hours * kSecondsPerHour / kJoulesPerGJ;
    cost.tac = cost.capital / params.payback_years + cost.operating;
    return cost;
}

double column_tac(std::span<const thermo::Component> components, const column::ColumnResult& result,
                  const column::ColumnSpec& spec, const EconomicParams& params)
{
    const ColumnSize size = size_column(components, result, spec, params);
    const CostBasis basis{size.diameter,          size.height,
                          spec.n_stages,          result.condenser_duty,
                          result.reboiler_duty,   result.distillate.temperature};
    return cost_breakdown(basis, params).tac;
}

double stream_purity(const thermo::Stream& stream)
{
    const double total = stream.total_flow();
    if (!(total > 0.0)) return 0.0;
    return *std::max_element(stream.flows.begin(), stream.flows.end()) / total;
}

bool meets_purity(const thermo::Stream& stream, const ProductPricing& pricing)
{
    return stream.total_flow() > 0.0 && stream_purity(stream) >= pricing.purity_spec;
}

double stream_revenue(std::span<const thermo::Component> components, const thermo::Stream& stream,
                      const ProductPricing& pricing, const EconomicParams& params)
{
    if (!meets_purity(stream, pricing)) return 0.0;
    const auto majority = static_cast<std::size_t>(
        std::max_element(stream.flows.begin(), stream.flows.end()) - stream.flows.begin());
    double mass_flow = 0.0;  // kg/s
    for (std::size_t i = 0; i < stream.flows.size(); ++i) {
        mass_flow += stream.flows[i] * components[i].molar_mass;
    }
    const double tonnes_per_year = mass_flow * 3600.0 * params.annual_hours / 1000.0;
    return tonnes_per_year * pricing.prices[majority];
}

}  // namespace distill::economics
