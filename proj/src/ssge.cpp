#include "banditscreen/ssge.hpp"

#include <algorithm>
#include <cmath>

#include "banditscreen/eig.hpp"
#include "banditscreen/errors.hpp"

namespace banditscreen {

namespace {

constexpr double kEigenvalueFloor = 1e-10;
constexpr double kTraceFraction = 0.99;

Matrix rbf_gram(const Matrix& x, const Matrix& y, double bandwidth) {
    Matrix k(x.rows(), y.rows());
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    const std::size_t d = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double* krow = k.row(i);
        for (std::size_t j = 0; j < y.rows(); ++j) {
            const double* yj = y.row(j);
            double dist2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xi[c] - yj[c];
                dist2 += diff * diff;
            }
            krow[j] = std::exp(-dist2 * inv);
        }
    }
    return k;
}

}  // namespace

double median_bandwidth(const Matrix& samples) {
    const std::size_t m = samples.rows();
    if (m < 2) throw ContractError("median_bandwidth needs at least two samples");
    Vector dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < samples.cols(); ++c) {
                const double diff = samples(i, c) - samples(j, c);
                acc += diff * diff;
            }
            dists.push_back(std::sqrt(acc));
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    const double median = n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    return median > 0.0 ? median : 1.0;
}

SsgeModel SsgeModel::fit(const Matrix& samples, std::size_t j, double bandwidth) {
    if (j < 1 || j > samples.rows()) throw ContractError("SSGE rank must be in [1, M]");
    if (bandwidth < 0.0) throw ContractError("SSGE bandwidth must be nonnegative");
    return fit_impl(samples, j, false, bandwidth);
}

SsgeModel SsgeModel::fit_auto(const Matrix& samples) {
    return fit_impl(samples, samples.rows(), true, 0.0);
}

SsgeModel SsgeModel::fit_impl(const Matrix& samples, std::size_t j, bool auto_rank,
                              double bandwidth) {
    const std::size_t m = samples.rows();
    if (m < 2) throw ContractError("SSGE fit needs at least two samples");

    SsgeModel model;
    model.samples_ = samples;
    model.bandwidth_ = bandwidth > 0.0 ? bandwidth : median_bandwidth(samples);
    model.gram_ = rbf_gram(samples, samples, model.bandwidth_);

    EigResult eig = symmetric_eig(model.gram_);

    std::size_t rank = 0;
    if (auto_rank) {
        double trace = 0.0;
        for (double v : eig.eigenvalues) trace += std::max(v, 0.0);
        double acc = 0.0;
        while (rank < m && eig.eigenvalues[rank] > kEigenvalueFloor && acc < kTraceFraction * trace) {
            acc += eig.eigenvalues[rank];
            ++rank;
        }
    } else {
        while (rank < j && eig.eigenvalues[rank] > kEigenvalueFloor) ++rank;
    }
    rank = std::max<std::size_t>(rank, 1);
    if (eig.eigenvalues[0] <= kEigenvalueFloor) throw NumericError("SSGE Gram matrix has no usable spectrum");

    model.rank_ = rank;
    model.eigenvalues_.assign(eig.eigenvalues.begin(), eig.eigenvalues.begin() + rank);
    model.eigenvectors_ = Matrix(m, rank);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < rank; ++c) model.eigenvectors_(r, c) = eig.eigenvectors(r, c);

    // beta[j] = -(1/M) sum_m grad psi_j(x_m), with
    // grad psi_j(x) = (sqrt(M)/lambda_j) sum_m u_jm k(x, x_m) (x_m - x) / bw^2.
    const std::size_t d = samples.cols();
    const double inv_bw2 = 1.0 / (model.bandwidth_ * model.bandwidth_);
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    Matrix grad_sum(rank, d);  // sum over evaluation points of grad psi_j
    for (std::size_t a = 0; a < m; ++a) {
        const double* ka = model.gram_.row(a);
        const double* xa = samples.row(a);
        for (std::size_t b = 0; b < m; ++b) {
            const double* xb = samples.row(b);
            const double kab = ka[b];
            for (std::size_t jj = 0; jj < rank; ++jj) {
                const double w = model.eigenvectors_(b, jj) * kab;
                double* grow = grad_sum.row(jj);
                for (std::size_t c = 0; c < d; ++c) grow[c] += w * (xb[c] - xa[c]);
            }
        }
    }
    model.beta_ = Matrix(rank, d);
    for (std::size_t jj = 0; jj < rank; ++jj) {
        const double factor = -(sqrt_m / model.eigenvalues_[jj]) * inv_bw2 / static_cast<double>(m);
        for (std::size_t c = 0; c < d; ++c) model.beta_(jj, c) = factor * grad_sum(jj, c);
    }
    model.beta_.ensure_finite("SSGE coefficient computation");
    return model;
}

Matrix SsgeModel::score(const Matrix& query) const {
    if (query.cols() != samples_.cols()) throw ShapeError("SSGE query dimension does not match samples");
    const std::size_t b = query.rows();
    const std::size_t m = samples_.rows();
    Matrix kq = rbf_gram(query, samples_, bandwidth_);

    // psi[b][j] = (sqrt(M)/lambda_j) sum_m u_jm k(x_b, x_m)
    Matrix psi = Matrix::matmul(kq, eigenvectors_);
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    for (std::size_t r = 0; r < b; ++r) {
        double* row = psi.row(r);
        for (std::size_t j = 0; j < rank_; ++j) row[j] *= sqrt_m / eigenvalues_[j];
    }

    Matrix scores = Matrix::matmul(psi, beta_);
    scores.ensure_finite("SSGE score");
    return scores;
}

}  // namespace banditscreen
