#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eescreen/error.hpp"
#include "eescreen/numeric.hpp"

namespace eescreen {

using SparseCoefs = std::map<std::size_t, double>;

/// Dense n x p covariate matrix stored column-major, with the record of the
/// centering/scaling applied by standardize().
class CovariateMatrix {
public:
    CovariateMatrix() = default;

    CovariateMatrix(std::size_t n, std::size_t p, std::vector<double> values)
        : n_(n), p_(p), values_(std::move(values)),
          col_means_(p, 0.0), col_scales_(p, 1.0) {
        if (n_ < 2 || p_ < 1) {
            fail(ErrorKind::invalid_argument, "matrix needs n >= 2 and p >= 1");
        }
        if (values_.size() != n_ * p_) {
            fail(ErrorKind::invalid_argument, "value count does not equal n*p");
        }
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return p_; }
    bool standardized() const noexcept { return standardized_; }

    std::span<const double> col(std::size_t j) const {
        return {values_.data() + j * n_, n_};
    }
    double operator()(std::size_t i, std::size_t j) const { return values_[j * n_ + i]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> col_means() const noexcept { return col_means_; }
    std::span<const double> col_scales() const noexcept { return col_scales_; }

    /// Copy of the listed columns, in the order given. Standardization
    /// metadata travels with each column.
    CovariateMatrix select_columns(std::span<const std::size_t> cols) const {
        std::vector<double> v;
        v.reserve(n_ * cols.size());
        for (auto j : cols) {
            if (j >= p_) fail(ErrorKind::out_of_range, "column index out of range");
            auto c = col(j);
            v.insert(v.end(), c.begin(), c.end());
        }
        CovariateMatrix out(n_, cols.size(), std::move(v));
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out.col_means_[k] = col_means_[cols[k]];
            out.col_scales_[k] = col_scales_[cols[k]];
        }
        out.standardized_ = standardized_;
        return out;
    }

    friend CovariateMatrix standardize(const CovariateMatrix& m);
    friend CovariateMatrix apply_standardization(const CovariateMatrix& m,
                                                 std::span<const double> means,
                                                 std::span<const double> scales);

private:
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::vector<double> values_;
    std::vector<double> col_means_;
    std::vector<double> col_scales_;
    bool standardized_ = false;
};

inline constexpr double kConstantColumnVariance = 1e-14;

/// Centers each column by its sample mean and divides by the divisor-n
/// standard deviation. Re-applying to standardized input composes the
/// transforms, so col_means/col_scales always map raw values to the output.
inline CovariateMatrix standardize(const CovariateMatrix& m) {
    CovariateMatrix out = m;
    const std::size_t n = m.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < m.p(); ++j) {
        auto c = m.col(j);
        const double mean = pairwise_sum(c) * inv_n;
        const double var =
            pairwise_sum_of(n, [&](std::size_t i) { return (c[i] - mean) * (c[i] - mean); }) * inv_n;
        if (!(var >= kConstantColumnVariance)) {
            fail(ErrorKind::constant_column, "column " + std::to_string(j) + " has zero variance");
        }
        const double sd = std::sqrt(var);
        double* dst = out.values_.data() + j * n;
        for (std::size_t i = 0; i < n; ++i) dst[i] = (c[i] - mean) / sd;
        out.col_means_[j] = m.col_means_[j] + m.col_scales_[j] * mean;
        out.col_scales_[j] = m.col_scales_[j] * sd;
    }
    out.standardized_ = true;
    return out;
}

/// Applies a transform learned elsewhere (e.g. on a training sample) to raw data.
inline CovariateMatrix apply_standardization(const CovariateMatrix& m,
                                             std::span<const double> means,
                                             std::span<const double> scales) {
    if (means.size() != m.p() || scales.size() != m.p()) {
        fail(ErrorKind::invalid_argument, "transform length does not match p");
    }
    CovariateMatrix out = m;
    for (std::size_t j = 0; j < m.p(); ++j) {
        if (!(scales[j] > 0)) fail(ErrorKind::invalid_argument, "scale must be positive");
        double* dst = out.values_.data() + j * m.n();
        for (std::size_t i = 0; i < m.n(); ++i) dst[i] = (dst[i] - means[j]) / scales[j];
        out.col_means_[j] = means[j];
        out.col_scales_[j] = scales[j];
    }
    out.standardized_ = true;
    return out;
}

/// Observed times min(T, C) with event indicators. t_true is only populated
/// by the simulator.
struct SurvivalSample {
    std::vector<double> y;
    std::vector<int> delta;
    std::optional<std::vector<double>> t_true;

    std::size_t size() const noexcept { return y.size(); }
};

inline void validate(const SurvivalSample& s) {
    if (s.y.size() != s.delta.size()) {
        fail(ErrorKind::invalid_argument, "time and event columns differ in length");
    }
    if (s.y.empty()) fail(ErrorKind::invalid_argument, "empty survival sample");
    bool any_event = false;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        if (!std::isfinite(s.y[i])) fail(ErrorKind::malformed_file, "non-finite time");
        if (s.y[i] < 0) fail(ErrorKind::negative_time, "row " + std::to_string(i));
        if (s.delta[i] != 0 && s.delta[i] != 1) {
            fail(ErrorKind::non_binary_event, "row " + std::to_string(i));
        }
        any_event = any_event || s.delta[i] == 1;
    }
    if (!any_event) fail(ErrorKind::all_censored, "no observed events");
}

/// Sparse true coefficient vector of a simulation scenario.
struct TrueModel {
    SparseCoefs beta0;

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (const auto& [j, b] : beta0) {
            if (b != 0.0) out.push_back(j);
        }
        return out;
    }
    std::size_t size() const { return indices().size(); }
};

// ---------------------------------------------------------------------------
// File ingestion

struct LoadOptions {
    std::size_t max_bytes = std::size_t{8} << 30;
};

enum class MatrixFormat { csv, binary };

inline constexpr char kEematMagic[16] = {'E', 'E', 'M', 'A', 'T', '0', '0', '1'};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        fields.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

inline double parse_double(std::string_view field, std::size_t row) {
    double v = 0.0;
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end) {
        fail(ErrorKind::malformed_file,
             "non-numeric cell '" + std::string(field) + "' on data row " + std::to_string(row));
    }
    if (!std::isfinite(v)) {
        fail(ErrorKind::malformed_file, "NaN/Inf cell on data row " + std::to_string(row));
    }
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::malformed_file, "missing header row");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    for (auto f : split_csv(line)) t.header.emplace_back(f);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        auto fields = split_csv(line);
        if (fields.size() != t.header.size()) {
            fail(ErrorKind::malformed_file, "data row " + std::to_string(row) + " has " +
                                                std::to_string(fields.size()) + " fields, expected " +
                                                std::to_string(t.header.size()));
        }
        std::vector<double> vals;
        vals.reserve(fields.size());
        for (auto f : fields) vals.push_back(parse_double(f, row));
        t.rows.push_back(std::move(vals));
    }
    return t;
}

template <class T>
void write_le(std::ostream& out, T v) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), bytes.size());
}

template <class T>
T read_le(std::istream& in) {
    std::array<char, sizeof(T)> bytes{};
    if (!in.read(bytes.data(), bytes.size())) fail(ErrorKind::malformed_file, "truncated binary matrix");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

}  // namespace detail

inline MatrixFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".eemat" ? MatrixFormat::binary : MatrixFormat::csv;
}

inline CovariateMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                                   const LoadOptions& opts = {}) {
    if (format == MatrixFormat::csv) {
        auto t = detail::read_numeric_csv(path);
        const std::size_t n = t.rows.size();
        const std::size_t p = t.header.size();
        if (n < 2) fail(ErrorKind::malformed_file, "need at least two data rows");
        if (n * p > opts.max_bytes / sizeof(double)) {
            fail(ErrorKind::dimension_overflow, "matrix exceeds memory cap");
        }
        std::vector<double> v(n * p);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p; ++j) v[j * n + i] = t.rows[i][j];
        }
        return CovariateMatrix(n, p, std::move(v));
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    char magic[16];
    if (!in.read(magic, 16) || std::memcmp(magic, kEematMagic, 16) != 0) {
        fail(ErrorKind::malformed_file, "bad .eemat magic");
    }
    const auto n = detail::read_le<std::uint64_t>(in);
    const auto p = detail::read_le<std::uint64_t>(in);
    if (n < 2 || p < 1) fail(ErrorKind::malformed_file, "bad .eemat dimensions");
    if (p > opts.max_bytes / sizeof(double) / n) {
        fail(ErrorKind::dimension_overflow, "matrix exceeds memory cap");
    }
    std::vector<double> v(n * p);
    for (auto& x : v) {
        x = detail::read_le<double>(in);
        if (!std::isfinite(x)) fail(ErrorKind::malformed_file, "NaN/Inf cell in binary matrix");
    }
    return CovariateMatrix(n, p, std::move(v));
}

inline CovariateMatrix load_matrix(const std::filesystem::path& path, const LoadOptions& opts = {}) {
    return load_matrix(path, format_from_path(path), opts);
}

inline void save_matrix(const CovariateMatrix& m, const std::filesystem::path& path,
                        MatrixFormat format) {
    std::ofstream out(path, format == MatrixFormat::binary ? std::ios::binary : std::ios::out);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    if (format == MatrixFormat::binary) {
        out.write(kEematMagic, 16);
        detail::write_le<std::uint64_t>(out, m.n());
        detail::write_le<std::uint64_t>(out, m.p());
        for (double x : m.values()) detail::write_le<double>(out, x);
        return;
    }
    for (std::size_t j = 0; j < m.p(); ++j) out << (j ? "," : "") << 'x' << j;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < m.n(); ++i) {
        for (std::size_t j = 0; j < m.p(); ++j) {
            auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
            if (j) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

inline std::size_t find_column(const std::vector<std::string>& header, std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::malformed_file, "missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

/// Reads a "time,event" csv and validates it.
inline SurvivalSample load_survival(const std::filesystem::path& path) {
    auto t = detail::read_numeric_csv(path);
    const auto ti = find_column(t.header, "time");
    const auto ei = find_column(t.header, "event");
    SurvivalSample s;
    for (const auto& r : t.rows) {
        s.y.push_back(r[ti]);
        const double e = r[ei];
        if (e != 0.0 && e != 1.0) fail(ErrorKind::non_binary_event, "event value must be 0 or 1");
        s.delta.push_back(static_cast<int>(e));
    }
    validate(s);
    return s;
}

inline void save_survival(const SurvivalSample& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << "time,event\n";
    char buf[32];
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto res = std::to_chars(buf, buf + sizeof buf, s.y[i]);
        out.write(buf, res.ptr - buf);
        out << ',' << s.delta[i] << '\n';
    }
}

/// One numeric column by name, or the first column when `name` is empty.
inline std::vector<double> load_column(const std::filesystem::path& path, std::string_view name = {}) {
    auto t = detail::read_numeric_csv(path);
    const std::size_t c = name.empty() ? 0 : find_column(t.header, name);
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.push_back(r[c]);
    return out;
}

}  // namespace eescreen
