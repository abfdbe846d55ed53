#include "mmf/kernels.hpp"

namespace mmf::kernels {

Backend& backend() {
  static Backend b = Backend::Parallel;
  return b;
}

}  // namespace mmf::kernels
