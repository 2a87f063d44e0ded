#include "ethlab/shell.hpp"

#include "ethlab/errors.hpp"

#include <string>

namespace ethlab {

void ShellSpec::validate() const {
    if (!(delta_e0 > 0.0)) throw ConfigError("shell width must be positive, got " + std::to_string(delta_e0));
}

void ShellSpec::require_inside(const Eigen::VectorXd& energies) const {
    validate();
    if (energies.size() == 0 || e0 < energies[0] || e0 > energies[energies.size() - 1]) {
        throw ConfigError("shell centre " + std::to_string(e0) + " lies outside the spectrum");
    }
}

std::vector<std::size_t> ShellSpec::members(const Eigen::VectorXd& energies) const {
    std::vector<std::size_t> idx;
    for (Eigen::Index i = 0; i < energies.size(); ++i)
        if (contains(energies[i])) idx.push_back(static_cast<std::size_t>(i));
    return idx;
}

}  // namespace ethlab
