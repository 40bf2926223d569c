#include "hdlp/core.hpp"
#include "hdlp/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace hdlp {

namespace {

std::vector<std::string> default_labels(std::size_t n)
{
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(fmt::format("x{}", i + 1));
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

// Splits one record, honouring double-quoted fields.
std::vector<std::string> split_record(std::string_view line, char delim)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(std::string(trim(cur)));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::string(trim(cur)));
    return fields;
}

bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    if (s.empty())
        return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

} // namespace

PanelSeries::PanelSeries(Matrix values, std::size_t pad, std::vector<std::string> labels)
    : values_(std::move(values)), pad_(pad), labels_(std::move(labels))
{
    if (values_.cols() < 1)
        throw ArgumentError("panel must have at least one variable");
    if (static_cast<std::size_t>(values_.rows()) < pad_ + 2)
        throw InsufficientSampleError(fmt::format("panel needs at least 2 observations after {} pad rows, got {} rows",
                                        pad_, values_.rows()));
    if (!values_.allFinite())
        throw ArgumentError("panel contains non-finite values");
    if (labels_.empty())
        labels_ = default_labels(n_vars());
    if (labels_.size() != n_vars())
        throw ArgumentError(fmt::format("expected {} labels, got {}", n_vars(), labels_.size()));
}

PanelSeries parse_csv(const std::string& text, const CsvOptions& options)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    bool header_pending = options.has_header;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        auto fields = split_record(line, options.delimiter);
        if (options.skip_first_column) {
            if (fields.size() < 2)
                throw ParseError(fmt::format("line {}: no data columns after the skipped column", line_no),
                                 line_no, 0);
            fields.erase(fields.begin());
        }
        if (width == 0)
            width = fields.size();
        else if (fields.size() != width)
            throw ParseError(fmt::format("line {}: expected {} fields, found {}", line_no, width, fields.size()),
                             line_no, 0);

        if (header_pending) {
            labels = std::move(fields);
            header_pending = false;
            continue;
        }
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t col = j + 1 + (options.skip_first_column ? 1 : 0);
            if (!parse_double(fields[j], row[j]) || !std::isfinite(row[j]))
                throw ParseError(fmt::format("line {}, column {}: '{}' is not a finite number",
                                             line_no, col, fields[j]),
                                 line_no, col);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw EmptyInputError("CSV input contains no data rows");

    Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (rows.size() < 2)
        throw InsufficientSampleError("CSV input needs at least 2 data rows");
    return PanelSeries(std::move(values), 0, std::move(labels));
}

PanelSeries load_csv(const std::filesystem::path& path, const CsvOptions& options)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArgumentError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), options);
}

std::string format_real(double value)
{
    return fmt::format("{:.17g}", value);
}

std::string to_csv(const PanelSeries& series)
{
    std::string out;
    const auto& labels = series.labels();
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j)
            out += ',';
        out += labels[j];
    }
    out += '\n';
    const Matrix& v = series.values();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            if (j)
                out += ',';
            out += format_real(v(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_csv(const PanelSeries& series, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ArgumentError(fmt::format("cannot write '{}'", path.string()));
    out << to_csv(series);
}

PanelSeries standardize(const PanelSeries& series)
{
    const Matrix& v = series.values();
    const double n = static_cast<double>(v.rows());
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double mean = v.col(j).mean();
        const double var = (v.col(j).array() - mean).square().sum() / (n - 1.0);
        if (!(var > 0.0) || var < 1e-300)
            throw DegenerateColumnError(
                fmt::format("variable '{}' has zero variance", series.labels()[static_cast<std::size_t>(j)]),
                static_cast<std::size_t>(j));
        out.col(j) = (v.col(j).array() - mean) / std::sqrt(var);
    }
    return PanelSeries(std::move(out), series.pad(), series.labels());
}

LpDesign build_design(const PanelSeries& series, std::size_t lags, std::size_t horizon,
                      std::size_t align_lags)
{
    if (lags < 1)
        throw ArgumentError("lag order must be at least 1");
    if (horizon < 1)
        throw ArgumentError("horizon must be at least 1");
    if (horizon >= series.n_obs())
        throw InsufficientSampleError(
            fmt::format("horizon {} leaves no observations (T = {})", horizon, series.n_obs()));

    const std::size_t first = std::max(lags, align_lags) - 1;
    const std::size_t rows = series.total_rows();
    if (first + horizon + 2 > rows)
        throw InsufficientSampleError(fmt::format(
            "need at least 2 usable rows for p = {}, h = {} (have {} rows)", std::max(lags, align_lags),
            horizon, rows));
    const std::size_t n_eff = rows - horizon - first;
    const std::size_t n = series.n_vars();
    const Matrix& v = series.values();

    LpDesign d;
    d.horizon = horizon;
    d.lags = lags;
    d.n_vars = n;
    d.X.resize(static_cast<Eigen::Index>(n_eff), static_cast<Eigen::Index>(n * lags));
    d.Y.resize(static_cast<Eigen::Index>(n_eff), static_cast<Eigen::Index>(n));
    const auto N = static_cast<Eigen::Index>(n);
    for (std::size_t r = 0; r < n_eff; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const auto t = static_cast<Eigen::Index>(first + r);
        for (std::size_t k = 0; k < lags; ++k)
            d.X.block(row, static_cast<Eigen::Index>(k) * N, 1, N) = v.row(t - static_cast<Eigen::Index>(k));
        d.Y.row(row) = v.row(t + static_cast<Eigen::Index>(horizon));
    }
    return d;
}

} // namespace hdlp
