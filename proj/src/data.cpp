#include "banditscreen/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "banditscreen/csv.hpp"
#include "banditscreen/eig.hpp"
#include "banditscreen/errors.hpp"
#include "banditscreen/rng.hpp"

namespace banditscreen {

namespace {

constexpr double kMissingnessCutoff = 0.7;
constexpr double kUnitTol = 1e-9;

bool is_missing(double v) { return !std::isfinite(v); }

std::string cell_ref(const CsvTable& table, std::size_t row, std::size_t col) {
    return table.path.string() + ":" + std::to_string(table.line_numbers[row]) + ": column " +
           std::to_string(col + 1);
}

void check_unit_interval(const Matrix& m, const char* what) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            if (is_missing(v)) throw ContractError(std::string(what) + " contains missing values");
            if (v < -kUnitTol || v > 1.0 + kUnitTol)
                throw ContractError(std::string(what) + " has entries outside [0, 1]");
        }
}

}  // namespace

void RawScreen::validate() const {
    if (expression.rows() != cell_ids.size() || expression.cols() != gene_ids.size())
        throw ContractError("expression matrix does not match the id lists");
    if (response.rows() != cell_ids.size() || response.cols() != drug_ids.size())
        throw ContractError("response matrix does not match the id lists");
    if (fingerprints.rows() != drug_ids.size())
        throw ContractError("fingerprint rows do not match the drug list");
    for (std::size_t r = 0; r < expression.rows(); ++r)
        for (std::size_t c = 0; c < expression.cols(); ++c)
            if (is_missing(expression(r, c)))
                throw ContractError("expression matrix contains missing values");
    for (std::size_t r = 0; r < fingerprints.rows(); ++r)
        for (std::size_t c = 0; c < fingerprints.cols(); ++c) {
            const double v = fingerprints(r, c);
            if (v != 0.0 && v != 1.0) throw ContractError("fingerprints must be strictly 0/1");
        }
}

void PreparedScreen::validate() const {
    if (contexts.rows() != cell_ids.size() || responses.rows() != cell_ids.size())
        throw ContractError("prepared tables do not match the cell list");
    if (responses.cols() != actions.size())
        throw ContractError("prepared responses do not match the action set");
    check_unit_interval(contexts, "context matrix");
    check_unit_interval(responses, "response matrix");
    actions.validate();
}

RawScreen filter_missing(const RawScreen& raw) {
    raw.validate();
    const std::size_t n = raw.cell_ids.size();
    const std::size_t k = raw.drug_ids.size();

    std::vector<std::size_t> kept_cells;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t missing = 0;
        for (std::size_t j = 0; j < k; ++j)
            if (is_missing(raw.response(i, j))) ++missing;
        if (k == 0 || static_cast<double>(missing) / static_cast<double>(k) <= kMissingnessCutoff)
            kept_cells.push_back(i);
    }

    std::vector<std::size_t> kept_drugs;
    for (std::size_t j = 0; j < k; ++j) {
        bool complete = true;
        for (std::size_t i : kept_cells)
            if (is_missing(raw.response(i, j))) {
                complete = false;
                break;
            }
        if (complete) kept_drugs.push_back(j);
    }

    RawScreen out;
    out.gene_ids = raw.gene_ids;
    out.expression = Matrix(kept_cells.size(), raw.gene_ids.size());
    out.response = Matrix(kept_cells.size(), kept_drugs.size());
    out.fingerprints = Matrix(kept_drugs.size(), raw.fingerprints.cols());
    for (std::size_t i = 0; i < kept_cells.size(); ++i) {
        out.cell_ids.push_back(raw.cell_ids[kept_cells[i]]);
        for (std::size_t c = 0; c < raw.gene_ids.size(); ++c)
            out.expression(i, c) = raw.expression(kept_cells[i], c);
        for (std::size_t j = 0; j < kept_drugs.size(); ++j)
            out.response(i, j) = raw.response(kept_cells[i], kept_drugs[j]);
    }
    for (std::size_t j = 0; j < kept_drugs.size(); ++j) {
        out.drug_ids.push_back(raw.drug_ids[kept_drugs[j]]);
        for (std::size_t c = 0; c < raw.fingerprints.cols(); ++c)
            out.fingerprints(j, c) = raw.fingerprints(kept_drugs[j], c);
    }
    return out;
}

PcaResult pca_project(const Matrix& data, std::size_t d1) {
    const std::size_t n = data.rows();
    const std::size_t g = data.cols();
    if (n == 0 || g == 0) throw ContractError("pca over an empty matrix");
    if (d1 < 1 || d1 > std::min(n, g))
        throw ContractError("component count must lie in [1, min(rows, cols)]");

    PcaResult result;
    result.column_means.resize(g);
    Matrix centered(n, g);
    for (std::size_t c = 0; c < g; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += data(r, c);
        mean /= static_cast<double>(n);
        result.column_means[c] = mean;
        for (std::size_t r = 0; r < n; ++r) centered(r, c) = data(r, c) - mean;
    }

    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    double total_variance = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < g; ++c) total_variance += centered(r, c) * centered(r, c);
    total_variance /= denom;

    Vector eigenvalues(d1);
    result.components = Matrix(g, d1);
    if (g <= n) {
        Matrix cov = Matrix::matmul(centered.transpose(), centered) * (1.0 / denom);
        const EigResult eig = symmetric_eig(cov);
        for (std::size_t j = 0; j < d1; ++j) {
            eigenvalues[j] = eig.eigenvalues[j];
            for (std::size_t c = 0; c < g; ++c) result.components(c, j) = eig.eigenvectors(c, j);
        }
    } else {
        // Gram trick: eigenvectors v of X X^T / denom map to covariance
        // eigenvectors X^T v / sqrt(denom * lambda).
        Matrix gram = Matrix::matmul_transposed(centered, centered) * (1.0 / denom);
        const EigResult eig = symmetric_eig(gram);
        const double floor = 1e-12 * std::max(1.0, eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues[0]);
        for (std::size_t j = 0; j < d1; ++j) {
            const double lambda = eig.eigenvalues[j];
            if (lambda <= floor)
                throw NumericError("requested components exceed the numerical rank of the data");
            eigenvalues[j] = lambda;
            const double scale = 1.0 / std::sqrt(denom * lambda);
            for (std::size_t c = 0; c < g; ++c) {
                double dot = 0.0;
                for (std::size_t r = 0; r < n; ++r) dot += centered(r, c) * eig.eigenvectors(r, j);
                result.components(c, j) = dot * scale;
            }
        }
    }

    // Deterministic orientation: the largest-magnitude loading of every
    // component is positive.
    for (std::size_t j = 0; j < d1; ++j) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < g; ++c)
            if (std::abs(result.components(c, j)) > std::abs(result.components(arg, j))) arg = c;
        if (result.components(arg, j) < 0.0)
            for (std::size_t c = 0; c < g; ++c) result.components(c, j) = -result.components(c, j);
    }

    result.scores = Matrix::matmul(centered, result.components);
    result.variance_explained.resize(d1);
    for (std::size_t j = 0; j < d1; ++j)
        result.variance_explained[j] =
            total_variance > 0.0 ? std::max(0.0, eigenvalues[j]) / total_variance : 0.0;
    return result;
}

Matrix minmax_scale(const Matrix& data) {
    Matrix out(data.rows(), data.cols());
    for (std::size_t c = 0; c < data.cols(); ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const double v = data(r, c);
            if (is_missing(v)) throw ContractError("cannot scale a column with missing values");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) {
            const double inv = 1.0 / (hi - lo);
            for (std::size_t r = 0; r < data.rows(); ++r) out(r, c) = (data(r, c) - lo) * inv;
        } else {
            for (std::size_t r = 0; r < data.rows(); ++r) out(r, c) = 0.5;
        }
    }
    return out;
}

namespace {

// Numeric body of an id+values CSV; `allow_missing` maps empty/NA to NaN.
Matrix parse_numeric(const CsvTable& table, bool allow_missing, std::vector<std::string>* row_ids) {
    Matrix out(table.rows.size(), table.header.size() - 1);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (row_ids) row_ids->push_back(table.rows[r][0]);
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            const std::string& cell = table.rows[r][c];
            if (allow_missing && (cell.empty() || cell == "NA")) {
                out(r, c - 1) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const double v = parse_double(cell, cell_ref(table, r, c));
            if (!std::isfinite(v)) throw ParseError(cell_ref(table, r, c) + ": non-finite value");
            out(r, c - 1) = v;
        }
    }
    return out;
}

void check_id_join(const std::vector<std::string>& expected, const CsvTable& table,
                   const char* what) {
    if (table.rows.size() != expected.size())
        throw ParseError(table.path.string() + ": expected " + std::to_string(expected.size()) +
                         " " + what + " rows, got " + std::to_string(table.rows.size()));
    for (std::size_t r = 0; r < expected.size(); ++r)
        if (table.rows[r][0] != expected[r])
            throw ParseError(table.path.string() + ":" + std::to_string(table.line_numbers[r]) +
                             ": id '" + table.rows[r][0] + "' does not match '" + expected[r] +
                             "'");
}

}  // namespace

RawScreen load_screen(const std::filesystem::path& dir) {
    const CsvTable expression = read_csv(dir / "expression.csv");
    const CsvTable response = read_csv(dir / "response.csv");
    const CsvTable fingerprints = read_csv(dir / "fingerprints.csv");
    if (expression.header.size() < 2)
        throw ParseError(expression.path.string() + ": no gene columns");
    if (response.header.size() < 2) throw ParseError(response.path.string() + ": no drug columns");
    if (fingerprints.header.size() < 2)
        throw ParseError(fingerprints.path.string() + ": no fingerprint columns");

    RawScreen raw;
    raw.gene_ids.assign(expression.header.begin() + 1, expression.header.end());
    raw.drug_ids.assign(response.header.begin() + 1, response.header.end());
    raw.expression = parse_numeric(expression, false, &raw.cell_ids);
    check_id_join(raw.cell_ids, response, "cell");
    raw.response = parse_numeric(response, true, nullptr);
    check_id_join(raw.drug_ids, fingerprints, "drug");
    raw.fingerprints = parse_numeric(fingerprints, false, nullptr);
    for (std::size_t r = 0; r < raw.fingerprints.rows(); ++r)
        for (std::size_t c = 0; c < raw.fingerprints.cols(); ++c) {
            const double v = raw.fingerprints(r, c);
            if (v != 0.0 && v != 1.0)
                throw ParseError(cell_ref(fingerprints, r, c + 1) + ": non-binary fingerprint");
        }
    raw.validate();
    return raw;
}

PreparedScreen prepare(const RawScreen& raw, std::size_t d1, bool negate_response) {
    if (d1 < 1) throw ContractError("at least one context dimension required");
    const RawScreen filtered = filter_missing(raw);
    if (filtered.cell_ids.empty()) throw ContractError("filtering removed every cell line");
    if (filtered.drug_ids.empty()) throw ContractError("filtering removed every drug");

    const std::size_t d1_eff =
        std::min(d1, std::min(filtered.cell_ids.size(), filtered.gene_ids.size()));
    const PcaResult pca = pca_project(filtered.expression, d1_eff);

    PreparedScreen out;
    out.cell_ids = filtered.cell_ids;
    out.contexts = minmax_scale(pca.scores);
    Matrix responses = filtered.response;
    if (negate_response)
        for (std::size_t r = 0; r < responses.rows(); ++r)
            for (std::size_t c = 0; c < responses.cols(); ++c) responses(r, c) = -responses(r, c);
    out.responses = minmax_scale(responses);
    out.actions.features = filtered.fingerprints;
    out.actions.ids = filtered.drug_ids;
    out.cells_dropped = raw.cell_ids.size() - filtered.cell_ids.size();
    out.drugs_dropped = raw.drug_ids.size() - filtered.drug_ids.size();
    out.pca_components = d1_eff;
    for (double v : pca.variance_explained) out.pca_variance_explained += v;
    out.negated = negate_response;
    out.validate();
    return out;
}

namespace {

std::vector<std::string> numbered_header(const std::string& id_column, const std::string& stem,
                                         std::size_t count) {
    std::vector<std::string> header;
    header.push_back(id_column);
    for (std::size_t i = 1; i <= count; ++i) header.push_back(stem + std::to_string(i));
    return header;
}

std::vector<std::vector<std::string>> matrix_rows(const std::vector<std::string>& ids,
                                                  const Matrix& m, bool as_bits) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(m.cols() + 1);
        row.push_back(ids[r]);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            if (is_missing(v))
                row.push_back("NA");
            else if (as_bits)
                row.push_back(v == 0.0 ? "0" : "1");
            else
                row.push_back(format_double(v));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void save_prepared(const PreparedScreen& screen, const std::filesystem::path& dir) {
    screen.validate();
    std::filesystem::create_directories(dir);
    write_csv(dir / "contexts.csv", numbered_header("cell_id", "pc", screen.contexts.cols()),
              matrix_rows(screen.cell_ids, screen.contexts, false));
    std::vector<std::string> response_header;
    response_header.push_back("cell_id");
    response_header.insert(response_header.end(), screen.actions.ids.begin(),
                           screen.actions.ids.end());
    write_csv(dir / "response.csv", response_header,
              matrix_rows(screen.cell_ids, screen.responses, false));
    write_csv(dir / "fingerprints.csv",
              numbered_header("drug_id", "bit", screen.actions.dim()),
              matrix_rows(screen.actions.ids, screen.actions.features, true));

    nlohmann::ordered_json meta;
    meta["cells"] = screen.cell_ids.size();
    meta["drugs"] = screen.actions.size();
    meta["cells_dropped"] = screen.cells_dropped;
    meta["drugs_dropped"] = screen.drugs_dropped;
    meta["pca_components"] = screen.pca_components;
    meta["pca_variance_explained"] = screen.pca_variance_explained;
    meta["negated"] = screen.negated;
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
}

PreparedScreen load_prepared(const std::filesystem::path& dir) {
    const CsvTable contexts = read_csv(dir / "contexts.csv");
    const CsvTable responses = read_csv(dir / "response.csv");
    const CsvTable fingerprints = read_csv(dir / "fingerprints.csv");

    PreparedScreen screen;
    screen.contexts = parse_numeric(contexts, false, &screen.cell_ids);
    check_id_join(screen.cell_ids, responses, "cell");
    screen.responses = parse_numeric(responses, false, nullptr);
    screen.actions.ids.assign(responses.header.begin() + 1, responses.header.end());
    check_id_join(screen.actions.ids, fingerprints, "drug");
    screen.actions.features = parse_numeric(fingerprints, false, nullptr);

    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw IoError("cannot open " + (dir / "meta.json").string());
    try {
        const auto meta = nlohmann::ordered_json::parse(meta_in);
        screen.cells_dropped = meta.value("cells_dropped", std::size_t{0});
        screen.drugs_dropped = meta.value("drugs_dropped", std::size_t{0});
        screen.pca_components = meta.value("pca_components", screen.contexts.cols());
        screen.pca_variance_explained = meta.value("pca_variance_explained", 0.0);
        screen.negated = meta.value("negated", false);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "meta.json").string() + ": " + e.what());
    }
    screen.validate();
    return screen;
}

void save_raw(const RawScreen& raw, const std::filesystem::path& dir) {
    raw.validate();
    std::filesystem::create_directories(dir);
    std::vector<std::string> expr_header;
    expr_header.push_back("cell_id");
    expr_header.insert(expr_header.end(), raw.gene_ids.begin(), raw.gene_ids.end());
    write_csv(dir / "expression.csv", expr_header, matrix_rows(raw.cell_ids, raw.expression, false));
    std::vector<std::string> resp_header;
    resp_header.push_back("cell_id");
    resp_header.insert(resp_header.end(), raw.drug_ids.begin(), raw.drug_ids.end());
    write_csv(dir / "response.csv", resp_header, matrix_rows(raw.cell_ids, raw.response, false));
    write_csv(dir / "fingerprints.csv", numbered_header("drug_id", "bit", raw.fingerprints.cols()),
              matrix_rows(raw.drug_ids, raw.fingerprints, true));
}

RawScreen synthesize_screen(std::size_t cells, std::size_t genes, std::size_t drugs,
                            std::size_t fingerprint_bits, double missing_fraction,
                            std::uint64_t seed) {
    if (cells == 0 || genes == 0 || drugs == 0 || fingerprint_bits == 0)
        throw ContractError("synthetic screen dimensions must be positive");
    if (missing_fraction < 0.0 || missing_fraction >= 1.0)
        throw ContractError("missing fraction must lie in [0, 1)");
    Rng rng(seed);

    RawScreen raw;
    for (std::size_t i = 1; i <= cells; ++i) raw.cell_ids.push_back("cell" + std::to_string(i));
    for (std::size_t i = 1; i <= genes; ++i) raw.gene_ids.push_back("gene" + std::to_string(i));
    for (std::size_t i = 1; i <= drugs; ++i) raw.drug_ids.push_back("drug" + std::to_string(i));

    // Low-rank expression plus noise, so PCA has structure to find.
    const std::size_t rank = std::min<std::size_t>(5, std::min(cells, genes));
    Matrix u(cells, rank), v(genes, rank);
    for (std::size_t r = 0; r < cells; ++r)
        for (std::size_t c = 0; c < rank; ++c) u(r, c) = rng.normal();
    for (std::size_t r = 0; r < genes; ++r)
        for (std::size_t c = 0; c < rank; ++c) v(r, c) = rng.normal();
    raw.expression = Matrix::matmul_transposed(u, v);
    for (std::size_t r = 0; r < cells; ++r)
        for (std::size_t c = 0; c < genes; ++c) raw.expression(r, c) += 0.25 * rng.normal();

    raw.fingerprints = Matrix(drugs, fingerprint_bits);
    for (int attempt = 0;; ++attempt) {
        for (std::size_t d = 0; d < drugs; ++d)
            for (std::size_t c = 0; c < fingerprint_bits; ++c)
                raw.fingerprints(d, c) = rng.bernoulli(0.25) ? 1.0 : 0.0;
        bool distinct = true;
        for (std::size_t i = 0; i < drugs && distinct; ++i)
            for (std::size_t j = i + 1; j < drugs && distinct; ++j) {
                bool same = true;
                for (std::size_t c = 0; c < fingerprint_bits && same; ++c)
                    same = raw.fingerprints(i, c) == raw.fingerprints(j, c);
                distinct = !same;
            }
        if (distinct) break;
        if (attempt >= 1000) throw NumericError("failed to draw distinct fingerprints");
    }

    raw.response = Matrix(cells, drugs);
    Vector gene_w(genes), bit_w(fingerprint_bits);
    for (double& w : gene_w) w = rng.normal() / std::sqrt(static_cast<double>(genes));
    for (double& w : bit_w) w = rng.normal() / std::sqrt(static_cast<double>(fingerprint_bits));
    for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t j = 0; j < drugs; ++j) {
            double z = 0.0;
            for (std::size_t c = 0; c < genes; ++c) z += gene_w[c] * raw.expression(i, c);
            for (std::size_t c = 0; c < fingerprint_bits; ++c)
                z += bit_w[c] * raw.fingerprints(j, c);
            raw.response(i, j) = 1.0 / (1.0 + std::exp(-z)) + 0.05 * rng.normal();
        }

    // Missingness concentrates in partially screened cell lines, the pattern
    // real screens show; `missing_fraction` of cells keep under a quarter of
    // their responses and the rest stay fully observed.
    for (std::size_t i = 0; i < cells; ++i) {
        if (missing_fraction <= 0.0 || !rng.bernoulli(missing_fraction)) continue;
        const std::size_t keep = drugs / 4;
        std::vector<std::size_t> order(drugs);
        for (std::size_t j = 0; j < drugs; ++j) order[j] = j;
        for (std::size_t j = drugs; j > 1; --j)
            std::swap(order[j - 1], order[rng.uniform_index(j)]);
        for (std::size_t j = keep; j < drugs; ++j)
            raw.response(i, order[j]) = std::numeric_limits<double>::quiet_NaN();
    }
    return raw;
}

}  // namespace banditscreen
