#include "lhb/group_lasso.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lhb {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double lambda_datapoor(int epoch, long L, long d, double gamma, double c) {
  require(epoch >= 1, "lambda_datapoor: epoch index must be >= 1");
  require(L >= 1, "lambda_datapoor: L must be >= 1");
  require(d >= 1, "lambda_datapoor: d must be >= 1");
  require(gamma > 0 && gamma < 1, "lambda_datapoor: gamma must lie in (0, 1)");
  require(c >= 0, "lambda_datapoor: c must be nonnegative");
  const double rows = std::ldexp(static_cast<double>(L), epoch - 1);
  const double log_arg = std::ldexp(static_cast<double>(d * L), epoch) / gamma;
  require(log_arg > 1, "lambda_datapoor: log argument must exceed 1");
  return c * static_cast<double>(d) * std::sqrt(2.0 * std::log(log_arg) / rows);
}

double lambda_datarich(int epoch, long h, long d, double gamma, double c) {
  require(epoch >= 1, "lambda_datarich: epoch index must be >= 1");
  require(h >= 1, "lambda_datarich: h must be >= 1");
  require(d >= 1, "lambda_datarich: d must be >= 1");
  require(gamma > 0 && gamma < 1, "lambda_datarich: gamma must lie in (0, 1)");
  require(c >= 0, "lambda_datarich: c must be nonnegative");
  const double rows = std::ldexp(static_cast<double>(h), epoch - 1);
  const double log_arg = std::ldexp(static_cast<double>(h), epoch) / gamma;
  require(log_arg > 1, "lambda_datarich: log argument must exceed 1");
  return c * 2.0 * std::sqrt(2.0 * static_cast<double>(d) * std::log(log_arg) / rows);
}

}  // namespace lhb
