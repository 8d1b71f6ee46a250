#pragma once

#include <cstddef>

#include "banditscreen/matrix.hpp"

namespace banditscreen {

// Median of pairwise Euclidean distances; 1.0 when all points coincide.
// Needs at least two samples.
double median_bandwidth(const Matrix& samples);

// Score estimator for an implicit distribution: given M samples, recovers
// an approximation of grad_x log q(x) from the spectral decomposition of an
// RBF Gram matrix. The estimate expands each score component in Nystrom
// eigenfunctions of the kernel, with expansion coefficients obtained by
// integration by parts against the sample measure.
class SsgeModel {
  public:
    // Keeps the top-j eigenpairs with eigenvalues above a small floor
    // (j shrinks if fewer qualify). Requires M >= 2 and 1 <= j <= M.
    // bandwidth = 0 selects the median heuristic.
    static SsgeModel fit(const Matrix& samples, std::size_t j, double bandwidth = 0.0);
    // Chooses the rank that explains 99% of the Gram-matrix trace.
    static SsgeModel fit_auto(const Matrix& samples);

    // query [B x d] -> estimated scores [B x d].
    Matrix score(const Matrix& query) const;

    std::size_t rank() const { return rank_; }
    double bandwidth() const { return bandwidth_; }
    const Vector& eigenvalues() const { return eigenvalues_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }
    const Matrix& gram() const { return gram_; }

  private:
    SsgeModel() = default;
    static SsgeModel fit_impl(const Matrix& samples, std::size_t j, bool auto_rank,
                              double bandwidth);

    Matrix samples_;       // [M x d]
    Matrix gram_;          // [M x M]
    Matrix eigenvectors_;  // [M x rank]
    Vector eigenvalues_;   // length rank, descending
    Matrix beta_;          // [rank x d] expansion coefficients
    double bandwidth_ = 1.0;
    std::size_t rank_ = 0;
};

}  // namespace banditscreen
