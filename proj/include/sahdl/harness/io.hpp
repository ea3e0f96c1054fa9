#pragma once

#include <sahdl/core.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

namespace sahdl::io {

enum class Format { csv, binmat };

/// Features plus labels when the source carries them.
struct LabeledFeatures {
    FeatureMatrix features;
    std::optional<LabelVector> labels;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// from_chars is locale independent; a leading '+' is accepted for convenience.
inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<int> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw InternalError("failed to format number");
    return {buf.data(), ptr};
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline void write_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV: one sample per row. A header row is detected when any of its cells is
// non-numeric; a final header column named "label" holds integer labels
// (-1 or an empty cell for unlabeled samples).
// ---------------------------------------------------------------------------

inline LabeledFeatures parse_csv(std::string_view text, const std::string& name = "<csv>") {
    std::vector<std::pair<std::size_t, std::string_view>> lines;  // (1-based line number, content)
    std::size_t lineno = 0, start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        const auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        ++lineno;
        if (!detail::trim(line).empty()) lines.emplace_back(lineno, line);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (lines.empty()) throw InputError(name + ": no data rows");

    auto first = detail::split(lines.front().second);
    bool has_header = false;
    for (auto cell : first)
        if (!detail::parse_double(cell)) has_header = true;

    const std::size_t width = first.size();
    const bool has_label = has_header && first.back() == "label";
    const std::size_t dim = has_label ? width - 1 : width;
    if (dim == 0) throw InputError(name + ": no feature columns");

    const std::size_t first_row = has_header ? 1 : 0;
    const std::size_t n = lines.size() - first_row;
    if (n == 0) throw InputError(name + ": header but no data rows");

    Matrix values(static_cast<Index>(dim), static_cast<Index>(n));
    std::vector<int> labels;
    for (std::size_t r = 0; r < n; ++r) {
        const auto [ln, line] = lines[first_row + r];
        const auto cells = detail::split(line);
        if (cells.size() != width)
            throw InputError(name + ": line " + std::to_string(ln) + " has " + std::to_string(cells.size()) +
                             " fields, expected " + std::to_string(width));
        for (std::size_t c = 0; c < dim; ++c) {
            const auto v = detail::parse_double(cells[c]);
            if (!v || !std::isfinite(*v))
                throw InputError(name + ": line " + std::to_string(ln) + ", column " + std::to_string(c + 1) +
                                 ": invalid number '" + std::string(cells[c]) + "'");
            values(static_cast<Index>(c), static_cast<Index>(r)) = *v;
        }
        if (has_label) {
            const auto cell = cells.back();
            if (cell.empty()) {
                labels.push_back(kUnlabeled);
            } else {
                const auto l = detail::parse_int(cell);
                if (!l || *l < kUnlabeled)
                    throw InputError(name + ": line " + std::to_string(ln) + ": invalid label '" +
                                     std::string(cell) + "'");
                labels.push_back(*l);
            }
        }
    }

    LabeledFeatures out{FeatureMatrix(std::move(values)), std::nullopt};
    if (has_label) out.labels = LabelVector::from_labels(std::move(labels));
    return out;
}

inline LabeledFeatures load_csv(const std::string& path) { return parse_csv(detail::read_file(path), path); }

inline std::string to_csv(const FeatureMatrix& X, const LabelVector* labels = nullptr) {
    if (labels && static_cast<Index>(labels->size()) != X.size())
        throw ParameterError("to_csv: label count does not match sample count");
    std::string out;
    for (Index i = 0; i < X.dim(); ++i) {
        if (i) out += ',';
        out += 'f' + std::to_string(i);
    }
    if (labels) out += ",label";
    out += '\n';
    for (Index j = 0; j < X.size(); ++j) {
        for (Index i = 0; i < X.dim(); ++i) {
            if (i) out += ',';
            out += detail::format_double(X.values(i, j));
        }
        if (labels) out += ',' + std::to_string(labels->labels[static_cast<std::size_t>(j)]);
        out += '\n';
    }
    return out;
}

inline void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed for '" + path + "'");
}

inline void save_csv(const std::string& path, const FeatureMatrix& X, const LabelVector* labels = nullptr) {
    write_file(path, to_csv(X, labels));
}

// ---------------------------------------------------------------------------
// binmat: "SAHD" | 0x01 | rows u64 LE | cols u64 LE | rows*cols f64 LE, column-major
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kBinmatMagic{'S', 'A', 'H', 'D'};
inline constexpr unsigned char kBinmatVersion = 0x01;
inline constexpr std::size_t kBinmatHeaderBytes = 4 + 1 + 8 + 8;

inline std::string encode_binmat(const Matrix& m) {
    std::string out(kBinmatMagic.begin(), kBinmatMagic.end());
    out.push_back(static_cast<char>(kBinmatVersion));
    detail::write_u64_le(out, static_cast<std::uint64_t>(m.rows()));
    detail::write_u64_le(out, static_cast<std::uint64_t>(m.cols()));
    out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) detail::write_u64_le(out, std::bit_cast<std::uint64_t>(m(i, j)));
    return out;
}

inline Matrix decode_binmat(std::string_view bytes, const std::string& name = "<binmat>") {
    if (bytes.size() < kBinmatHeaderBytes) throw InputError(name + ": truncated binmat header");
    if (std::memcmp(bytes.data(), kBinmatMagic.data(), 4) != 0) throw InputError(name + ": bad binmat magic");
    if (static_cast<unsigned char>(bytes[4]) != kBinmatVersion)
        throw InputError(name + ": unsupported binmat version " +
                         std::to_string(static_cast<unsigned char>(bytes[4])));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t rows = detail::read_u64_le(p + 5);
    const std::uint64_t cols = detail::read_u64_le(p + 13);
    const std::uint64_t payload = bytes.size() - kBinmatHeaderBytes;
    constexpr auto kMaxDim = static_cast<std::uint64_t>(std::numeric_limits<Index>::max());
    if (rows > kMaxDim || cols > kMaxDim) throw InputError(name + ": binmat shape out of range");
    if (cols != 0 && rows > payload / 8 / cols)
        throw InputError(name + ": truncated binmat payload");
    if (rows * cols * 8 != payload)
        throw InputError(name + ": binmat payload is " + std::to_string(payload) + " bytes, expected " +
                         std::to_string(rows * cols * 8));

    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    const unsigned char* q = p + kBinmatHeaderBytes;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i, q += 8) m(i, j) = std::bit_cast<double>(detail::read_u64_le(q));
    return m;
}

inline void save_binmat(const std::string& path, const Matrix& m) { write_file(path, encode_binmat(m)); }

inline FeatureMatrix load_binmat(const std::string& path) {
    return FeatureMatrix(decode_binmat(detail::read_file(path), path));
}

// ---------------------------------------------------------------------------
// Label sidecar for binmat features: "<path>.labels", one integer per line.
// ---------------------------------------------------------------------------

inline std::string labels_path(const std::string& features_path) { return features_path + ".labels"; }

inline LabelVector load_labels(const std::string& path) {
    const auto text = detail::read_file(path);
    std::vector<int> labels;
    std::size_t lineno = 0, start = 0;
    while (start < text.size()) {
        const auto pos = text.find('\n', start);
        const auto line = detail::trim(std::string_view(text).substr(
            start, pos == std::string::npos ? std::string::npos : pos - start));
        ++lineno;
        if (!line.empty()) {
            const auto l = detail::parse_int(line);
            if (!l || *l < kUnlabeled)
                throw InputError(path + ": line " + std::to_string(lineno) + ": invalid label '" +
                                 std::string(line) + "'");
            labels.push_back(*l);
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return LabelVector::from_labels(std::move(labels));
}

inline void save_labels(const std::string& path, const LabelVector& labels) {
    std::string out;
    for (int l : labels.labels) out += std::to_string(l) + '\n';
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// Format dispatch
// ---------------------------------------------------------------------------

inline LabeledFeatures load_dataset(const std::string& path, Format format) {
    LabeledFeatures out;
    if (format == Format::csv) {
        out = load_csv(path);
    } else {
        out.features = load_binmat(path);
        if (std::filesystem::exists(labels_path(path))) out.labels = load_labels(labels_path(path));
    }
    out.features.validate();
    if (out.labels && static_cast<Index>(out.labels->size()) != out.features.size())
        throw InputError(path + ": " + std::to_string(out.labels->size()) + " labels for " +
                         std::to_string(out.features.size()) + " samples");
    return out;
}

inline void save_dataset(const std::string& path, Format format, const FeatureMatrix& X,
                         const LabelVector* labels = nullptr) {
    if (format == Format::csv) {
        save_csv(path, X, labels);
    } else {
        save_binmat(path, X.values);
        if (labels) save_labels(labels_path(path), *labels);
    }
}

inline void save_matrix(const std::string& path, Format format, const Matrix& m) {
    save_dataset(path, format, FeatureMatrix(m));
}

}  // namespace sahdl::io
