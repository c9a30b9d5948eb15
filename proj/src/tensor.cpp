#include "dictdis/tensor.hpp"

#include <cmath>
#include <sstream>

namespace dictdis {

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace dictdis
