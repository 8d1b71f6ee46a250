#pragma once

#include <vector>

#include "banditscreen/matrix.hpp"

namespace banditscreen {

struct EigResult {
    Vector eigenvalues;   // sorted descending
    Matrix eigenvectors;  // column i pairs with eigenvalues[i]; orthonormal
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Asymmetry beyond tolerance raises ContractError; failure to converge
// within the sweep cap raises NumericError.
EigResult symmetric_eig(const Matrix& m);

}  // namespace banditscreen
