#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ethlab {

// Closed energy window [e0 - delta_e0/2, e0 + delta_e0/2].
struct ShellSpec {
    double e0 = -1.2;
    double delta_e0 = 0.1;

    double lo() const { return e0 - 0.5 * delta_e0; }
    double hi() const { return e0 + 0.5 * delta_e0; }
    bool contains(double e) const { return e >= lo() && e <= hi(); }
    void validate() const;
    // Throws ConfigError unless the window overlaps [energies.front, energies.back].
    void require_inside(const Eigen::VectorXd& energies) const;

    // Indices of ascending energies that fall inside the shell.
    std::vector<std::size_t> members(const Eigen::VectorXd& energies) const;
};

}  // namespace ethlab
