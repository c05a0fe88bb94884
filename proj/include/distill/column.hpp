#pragma once

// Constant-molal-overflow distillation column (total condenser, partial
// reboiler) solved with the bubble-point method.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distill/thermo.hpp"

namespace distill::column {

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ColumnSpec {
    double pressure = 0.0;  // Pa
    int n_stages = 0;       // internal trays
    double reflux_ratio = 0.0;
    double boilup_ratio = 0.0;

    void validate() const;
};

struct SectionFlows {
    double distillate = 0.0;
    double bottoms = 0.0;
    double reflux = 0.0;          // L
    double vapor_top = 0.0;       // V
    double liquid_bottom = 0.0;   // L'
    double vapor_bottom = 0.0;    // V'
};

struct ColumnResult {
    thermo::Stream distillate;
    thermo::Stream bottoms;
    std::vector<double> stage_temperatures;  // condenser, trays 1..N, reboiler
    double condenser_duty = 0.0;             // W
    double reboiler_duty = 0.0;              // W
    double max_vapor_flow = 0.0;             // mol/s
    double feed_liquid_fraction = 1.0;
    SectionFlows flows;
    bool converged = false;
    int iterations = 0;
    double max_temperature_change = 0.0;  // K, last sweep
    std::string failure;                  // empty unless the solve broke down
};

/// Closes the two ratio specifications under constant molal overflow.
SectionFlows derive_flows(double total_feed, double q, double reflux_ratio, double boilup_ratio);

/// Tridiagonal solve without pivoting. `lower[0]` and `upper[n-1]` are ignored.
std::vector<double> thomas_solve(std::span<const double> lower, std::span<const double> diagonal,
                                 std::span<const double> upper, std::span<const double> rhs);

/// Tray receiving the feed, 1-based: ceil(N/2).
inline int feed_tray(int n_stages)
{
    return (n_stages + 1) / 2;
}

struct SolverOptions {
    double temperature_tolerance = 0.01;  // K
    int max_sweeps = 200;
};

/// Coefficients of one component's stage balances, rows 0..N+1 in liquid flows
/// (reflux, tray liquids, bottoms). `stripping[j]` is K_j V_j / L_j for
/// j = 1..N+1; index 0 is unused.
struct StageSystem {
    std::vector<double> lower;
    std::vector<double> diagonal;
    std::vector<double> upper;
    std::vector<double> rhs;
};

StageSystem assemble_component_system(int n_stages, double reflux_ratio,
                                      std::span<const double> stripping, double feed_flow);

ColumnResult solve_column(std::span<const thermo::Component> components, const thermo::Stream& feed,
                          const ColumnSpec& spec, const SolverOptions& options = {});

}  // namespace distill::column
