#pragma once

// Column sizing, total annual cost and product revenue.

#include <span>
#include <stdexcept>
#include <vector>

#include "distill/column.hpp"
#include "distill/thermo.hpp"

namespace distill::economics {

class SizingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UtilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EconomicParams {
    double annual_hours = 8000.0;      // h/yr
    double payback_years = 3.0;        // yr
    double heating_cost = 8.0;         // $/GJ
    double cooling_cost = 0.7;         // $/GJ
    double souders_brown_c = 0.065;    // m/s
    double tray_spacing = 0.6;         // m
    double height_allowance = 4.0;     // m
    double condenser_u = 800.0;        // W/(m2 K)
    double reboiler_u = 820.0;         // W/(m2 K)
    double cooling_water_in = 303.0;   // K
    double cooling_water_out = 313.0;  // K
    double reboiler_approach = 40.0;   // K
    double shell_coeff = 17640.0;
    double shell_diameter_exp = 1.066;
    double shell_height_exp = 0.802;
    double tray_coeff = 230.0;
    double tray_diameter_exp = 1.55;
    double hx_coeff = 7296.0;
    double hx_area_exp = 0.65;

    void validate() const;
};

struct ProductPricing {
    double purity_spec = 0.95;   // mole fraction
    std::vector<double> prices;  // $/tonne per component

    void validate(std::size_t component_count) const;
};

struct ColumnSize {
    double diameter = 0.0;  // m
    double height = 0.0;    // m
};

ColumnSize size_column(std::span<const thermo::Component> components,
                       const column::ColumnResult& result, const column::ColumnSpec& spec,
                       const EconomicParams& params);

/// Inputs to the cost correlations, separated from the column solve so the
/// correlations can be evaluated on their own.
struct CostBasis {
    double diameter = 0.0;               // m
    double height = 0.0;                 // m
    int n_stages = 0;
    double condenser_duty = 0.0;         // W
    double reboiler_duty = 0.0;          // W
    double condenser_temperature = 0.0;  // K
};

struct CostBreakdown {
    double capital = 0.0;    // $
    double operating = 0.0;  // $/yr
    double tac = 0.0;        // $/yr
    double condenser_area = 0.0;
    double reboiler_area = 0.0;
};

/// Log-mean temperature difference between a condensing stream at
/// `condenser_temperature` and cooling water warming from inlet to outlet.
double condenser_lmtd(double condenser_temperature, const EconomicParams& params);

CostBreakdown cost_breakdown(const CostBasis& basis, const EconomicParams& params);

double column_tac(std::span<const thermo::Component> components, const column::ColumnResult& result,
                  const column::ColumnSpec& spec, const EconomicParams& params);

/// Mole fraction of the most abundant component; 0 for an empty stream.
double stream_purity(const thermo::Stream& stream);

bool meets_purity(const thermo::Stream& stream, const ProductPricing& pricing);

/// Annual revenue in $/yr, zero unless the stream meets the purity spec.
double stream_revenue(std::span<const thermo::Component> components, const thermo::Stream& stream,
                      const ProductPricing& pricing, const EconomicParams& params);

inline double step_reward(double column_tac, double distillate_revenue, double bottoms_revenue,
                          double reward_scale)
{
    return (distillate_revenue + bottoms_revenue - column_tac) / reward_scale;
}

}  // namespace distill::economics
