#pragma once

// Ideal vapor-liquid equilibrium: Antoine vapor pressures, Raoult K-values,
// bubble/dew points, isothermal flash and simple mixture properties.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace distill::thermo {

inline constexpr double kGasConstant = 8.314;       // J/(mol K)
inline constexpr double kAtmosphere = 101325.0;     // Pa
inline constexpr double kExtrapolationBand = 20.0;  // K beyond the fit range

class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateStreamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pure-component property record. Antoine form: log10(Psat / bar) = A - B / (T / K + C).
struct Component {
    std::string name;
    double antoine_a = 0.0;
    double antoine_b = 0.0;
    double antoine_c = 0.0;
    double t_valid_min = 0.0;     // K
    double t_valid_max = 0.0;     // K
    double molar_mass = 0.0;      // kg/mol
    double latent_heat = 0.0;     // J/mol at the normal boiling point
    double liquid_density = 0.0;  // kg/m3

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

struct Stream {
    std::vector<double> flows;  // mol/s per component
    double temperature = 0.0;   // K
    double pressure = 0.0;      // Pa

    double total_flow() const;
    /// Mole fractions; throws DegenerateStreamError for a zero-flow stream.
    std::vector<double> composition() const;
    void validate(std::size_t component_count) const;
};

/// Bundled property table for the nine components used by the example problems.
const std::vector<Component>& component_library();
/// Looks up `name` in component_library(); throws std::out_of_range if absent.
const Component& library_component(const std::string& name);

/// Range-checked vapor pressure in Pa.
double psat(const Component& component, double temperature);

/// Antoine evaluation without the range check. Used inside the equilibrium
/// solvers, which may legitimately probe temperatures outside the fit range.
double psat_extrapolated(const Component& component, double temperature);

/// d ln(Psat) / dT for the Antoine form.
double dlnpsat_dt(const Component& component, double temperature);

/// Saturation temperature at `pressure` (inverse Antoine).
double boiling_point(const Component& component, double pressure);

inline double normal_boiling_point(const Component& component)
{
    return boiling_point(component, kAtmosphere);
}

std::vector<double> k_values(std::span<const Component> components, double temperature,
                             double pressure);

struct SaturationPoint {
    double temperature = 0.0;         // K
    std::vector<double> composition;  // incipient phase
    int iterations = 0;
};

SaturationPoint bubble_point(std::span<const Component> components, std::span<const double> x,
                             double pressure);
SaturationPoint dew_point(std::span<const Component> components, std::span<const double> y,
                          double pressure);

struct FlashResult {
    double liquid_fraction = 1.0;  // q
    std::vector<double> x;
    std::vector<double> y;
};

/// Rachford-Rice flash for given K-values.
FlashResult flash_with_k(std::span<const double> z, std::span<const double> k);

FlashResult flash_feed(std::span<const Component> components, std::span<const double> z,
                       double temperature, double pressure);

enum class Phase { liquid, vapor };

struct MixtureProperties {
    double molar_mass = 0.0;   // kg/mol
    double density = 0.0;      // kg/m3
    double latent_heat = 0.0;  // J/mol
};

MixtureProperties mixture_properties(std::span<const Component> components, const Stream& stream,
                                     Phase phase);

}  // namespace distill::thermo
