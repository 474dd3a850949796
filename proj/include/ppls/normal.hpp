#pragma once

namespace ppls {

// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

// Quantile of N(0,1): rational approximation refined by Newton steps on the
// CDF; absolute error below 1e-10 on (0,1).
double normal_quantile(double p);

}  // namespace ppls
