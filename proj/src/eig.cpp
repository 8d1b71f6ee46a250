#include "banditscreen/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "banditscreen/errors.hpp"

namespace banditscreen {

namespace {

constexpr double kAsymmetryTol = 1e-10;
constexpr double kConvergenceTol = 1e-12;  // on off-diagonal Frobenius norm, relative to ||m||_F
constexpr int kMaxSweeps = 100;

double off_diagonal_norm(const Matrix& a) {
    double acc = 0.0;
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
    return std::sqrt(2.0 * acc);
}

}  // namespace

EigResult symmetric_eig(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n) throw ContractError("symmetric_eig requires a non-empty square matrix");
    const double scale = std::max(1.0, m.max_abs());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > kAsymmetryTol * scale)
                throw ContractError("symmetric_eig input is not symmetric within tolerance");

    Matrix a = m;
    Matrix v = Matrix::identity(n);
    const double frob = std::max(1.0, a.frobenius_norm());
    const double target = kConvergenceTol * frob;

    bool converged = n == 1 || off_diagonal_norm(a) <= target;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        // Rotations below this size cannot matter for this sweep's target.
        const double skip = target / static_cast<double>(n * n);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= skip) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                double* rp = a.row(p);
                double* rq = a.row(q);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = rp[k];
                    const double akq = rq[k];
                    rp[k] = c * akp - s * akq;
                    rq[k] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(k, p);
                    const double aqk = a(k, q);
                    a(k, p) = c * apk - s * aqk;
                    a(k, q) = s * apk + c * aqk;
                }
                double* vp = v.row(p);
                double* vq = v.row(q);
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vp[k];
                    const double vkq = vq[k];
                    vp[k] = c * vkp - s * vkq;
                    vq[k] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(a) <= target;
    }
    if (!converged) throw NumericError("Jacobi eigendecomposition did not converge within sweep cap");

    // v holds rotations as rows; eigenvectors are its rows, emitted as columns
    // in descending eigenvalue order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        result.eigenvalues[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) result.eigenvectors(r, c) = v(order[c], r);
    }
    return result;
}

}  // namespace banditscreen
