#include "hsb/policy.hpp"

#include "hsb/errors.hpp"

namespace hsb {

void ProtocolGuard::throw_protocol(const char* what) {
  throw ProtocolError(what);
}

void check_loss(double loss) {
  if (!(loss >= 0.0 && loss <= 1.0))
    throw DomainError("loss " + std::to_string(loss) + " outside [0,1]");
}

}  // namespace hsb
