#pragma once

#include "bostomo/common.hpp"

namespace bos {

/// Gas constants entering the temperature to refractive index map.
struct MediumConstants {
  double rho0_G = 2.7e-4;  ///< dimensionless product of ambient density and Gladstone-Dale constant
  double T0 = 293.15;      ///< ambient temperature [K]
  double T_in = 323.15;    ///< inlet temperature [K]

  bool operator==(const MediumConstants&) const = default;

  double delta_T() const { return T_in - T0; }
  double temperature(double T_nd) const { return T0 + delta_T() * T_nd; }
  double nondim_temperature(double T) const { return (T - T0) / delta_T(); }
};

/// Nondimensional groups of the Boussinesq system and the scales behind them.
struct NondimConstants {
  double Re = 100.0;
  double Pe = 100.0;
  double Ri = 1.0;
  double L = 1.0;  ///< characteristic length [m]
  double U = 1.0;  ///< characteristic velocity [m/s]
  Vec3 e_g = Vec3(0.0, 0.0, -1.0);

  bool operator==(const NondimConstants&) const = default;
};

}  // namespace bos
