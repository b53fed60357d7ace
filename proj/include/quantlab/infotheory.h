// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Mutual information between a scalar Gaussian latent and its surrogate, in
// bits. All values come from deterministic quadrature.

#ifndef QUANTLAB_INFOTHEORY_H_
#define QUANTLAB_INFOTHEORY_H_

#include "quantlab/numerics.h"
#include "quantlab/sources.h"
#include "quantlab/surrogates.h"

namespace quantlab {

// H(round(Y)).
double mi_rounding(const Gaussian1D& source);
// h(Y + U), which equals I(Y; Y + U) because h(U) = 0.
double mi_aun(const Gaussian1D& source);
// H(Y~) - E[h_b(P(ceil | y))] for stochastic rounding.
double mi_sr(const Gaussian1D& source);
double mi_sra(const Gaussian1D& source, double alpha);
// h(s_alpha(Y) + U); r_alpha is invertible, so this is I(Y; Y~) for both
// SUA and SUA_N.
double mi_sua(const Gaussian1D& source, double alpha);

// Dispatch on the forward: ROUND, AUN, SR, SRA, SUA or SUA_N.
double mutual_information(const SurrogateSpec& spec, const Gaussian1D& source);

// I(Y; (Y~1, Y~2)) for the degenerate pair Y1 = Y2 = Y ~ N(0, sigma^2).
// ROUND and UQ_S collapse to the scalar values; AUN and UQ_I use the joint
// differential entropy of (Y + U1, Y + U2). Throws UnsupportedCase unless
// rho == 1.
double mi_2d_correlated(SurrogateKind kind, double sigma, double rho = 1.0);

struct EntropyPair {
  double h_cont = 0.0;  // h(Y + U)
  double h_disc = 0.0;  // H(round(Y - mu))
};
EntropyPair entropy_compare(double mu, double sigma);

}  // namespace quantlab

#endif  // QUANTLAB_INFOTHEORY_H_
