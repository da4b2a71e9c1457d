#pragma once

#include <cmath>
#include <numbers>

namespace bvqa {

/// Measurement / rotation angle. Protocol-grid angles (integer multiples of
/// pi/4) are carried exactly as an integer so encrypted-angle arithmetic and
/// equality checks never depend on floating-point modular reduction;
/// arbitrary variational angles fall back to a real value.
class Angle {
  public:
    Angle() = default;

    /// Exact grid angle g * pi/4, normalized to g in [0, 8).
    static Angle grid(int g) {
        Angle a;
        a.grid_ = ((g % 8) + 8) % 8;
        a.rad_ = a.grid_ * (std::numbers::pi / 4.0);
        return a;
    }

    /// Arbitrary real angle in radians (not tracked on the grid).
    static Angle radians(double rad) {
        Angle a;
        a.grid_ = -1;
        a.rad_ = rad;
        return a;
    }

    /// radians(rad), promoted to the exact grid when rad is within tol of a
    /// multiple of pi/4 (so decompositions of grid-exact gates stay exact).
    static Angle snapped(double rad, double tol = 1e-9) {
        const double steps = rad / (std::numbers::pi / 4.0);
        const double nearest = std::round(steps);
        if (std::abs(steps - nearest) * (std::numbers::pi / 4.0) < tol) {
            return grid(static_cast<int>(std::fmod(nearest, 8.0)));
        }
        return radians(rad);
    }

    [[nodiscard]] bool on_grid() const { return grid_ >= 0; }
    [[nodiscard]] int grid_index() const { return grid_; }
    [[nodiscard]] double rad() const { return rad_; }

    /// -angle; stays on the grid when the input is on it.
    [[nodiscard]] Angle negated() const {
        return on_grid() ? grid(-grid_) : radians(-rad_);
    }

    /// angle + g * pi/4; stays on the grid when the input is on it.
    [[nodiscard]] Angle plus_grid(int g) const {
        return on_grid() ? grid(grid_ + g)
                         : radians(rad_ + g * (std::numbers::pi / 4.0));
    }

    /// Canonical representative in [0, 2 pi).
    [[nodiscard]] double rad_mod_2pi() const {
        if (on_grid()) return rad_;
        const double two_pi = 2.0 * std::numbers::pi;
        double v = std::fmod(rad_, two_pi);
        if (v < 0.0) v += two_pi;
        return v;
    }

    /// Exact equality for two on-grid angles; tolerance compare otherwise.
    [[nodiscard]] bool same_as(const Angle& o, double tol = 1e-12) const {
        if (on_grid() && o.on_grid()) return grid_ == o.grid_;
        double d = std::fmod(rad_mod_2pi() - o.rad_mod_2pi(), 2.0 * std::numbers::pi);
        if (d < 0.0) d += 2.0 * std::numbers::pi;
        return d < tol || (2.0 * std::numbers::pi - d) < tol;
    }

  private:
    double rad_ = 0.0;
    int grid_ = 0;  // 0..7 when exact, -1 when free.
};

}  // namespace bvqa
