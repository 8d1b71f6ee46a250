#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "banditscreen/bandit.hpp"
#include "banditscreen/matrix.hpp"

namespace banditscreen {

// A drug screen as shipped: expression profiles, partially observed drug
// responses (NaN = missing), and 0/1 fingerprint rows per drug.
struct RawScreen {
    std::vector<std::string> cell_ids;   // N
    std::vector<std::string> gene_ids;   // G
    std::vector<std::string> drug_ids;   // K
    Matrix expression;                   // [N x G], fully observed
    Matrix response;                     // [N x K], NaN marks missing
    Matrix fingerprints;                 // [K x d2], strictly 0/1

    void validate() const;  // throws ContractError on inconsistency
};

// Simulator-ready screen: PCA-projected min-max-scaled contexts and a fully
// observed response table, both in [0,1], plus preprocessing provenance.
struct PreparedScreen {
    std::vector<std::string> cell_ids;
    Matrix contexts;    // [N' x d1]
    Matrix responses;   // [N' x K']
    ActionSet actions;  // K' fingerprints with drug ids

    std::size_t cells_dropped = 0;
    std::size_t drugs_dropped = 0;
    std::size_t pca_components = 0;
    double pca_variance_explained = 0.0;  // fraction captured by kept components
    bool negated = false;

    void validate() const;
};

struct PcaResult {
    Matrix scores;              // [N x d1]
    Matrix components;          // [G x d1], orthonormal columns
    Vector column_means;        // length G
    Vector variance_explained;  // per component, fractions of total variance
};

// Drops cell lines with more than 70% missing responses, then drops drugs
// still missing for any surviving line; in that order.
RawScreen filter_missing(const RawScreen& raw);

// Column-centered PCA onto the top d1 components. Uses the G x G covariance
// when G <= N, otherwise the N x N Gram matrix. Each component's
// largest-magnitude loading is made positive.
PcaResult pca_project(const Matrix& data, std::size_t d1);

// Per-column (x - min) / (max - min); constant columns map to 0.5.
Matrix minmax_scale(const Matrix& data);

// Reads expression.csv, response.csv and fingerprints.csv from `dir`.
// Row/column ids must agree across files, in order.
RawScreen load_screen(const std::filesystem::path& dir);

// filter_missing -> pca_project -> min-max scaling of contexts and responses.
// d1 is clamped to min(surviving cells, genes). `negate_response` flips the
// response sign before scaling, for exports where lower means more sensitive.
PreparedScreen prepare(const RawScreen& raw, std::size_t d1, bool negate_response = false);

// contexts.csv + response.csv + fingerprints.csv + meta.json under `dir`.
void save_prepared(const PreparedScreen& screen, const std::filesystem::path& dir);
PreparedScreen load_prepared(const std::filesystem::path& dir);

void save_raw(const RawScreen& raw, const std::filesystem::path& dir);

// Random dense screen in which `missing_fraction` of the cell lines are only
// partially screened (over 3/4 of their responses knocked out); deterministic
// in `seed`. For demos and pipeline tests.
RawScreen synthesize_screen(std::size_t cells, std::size_t genes, std::size_t drugs,
                            std::size_t fingerprint_bits, double missing_fraction,
                            std::uint64_t seed);

}  // namespace banditscreen
