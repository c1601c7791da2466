#include "ivhedge/surface.hpp"

namespace ivhedge {

void validate(const SurfaceCoeffs& beta) {
    if (!beta.allFinite()) {
        throw DomainError("surface coefficients must be finite");
    }
}

}  // namespace ivhedge
