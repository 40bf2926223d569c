#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hdlp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * An observed or simulated N-variable panel.
 *
 * Rows are time, columns are variables. The first `pad()` rows are
 * pre-sample observations that only serve as lags; row `pad()` is t = 1.
 * Immutable once constructed.
 */
class PanelSeries
{
public:
    PanelSeries(Matrix values, std::size_t pad,
                std::vector<std::string> labels = {});

    const Matrix& values() const noexcept { return values_; }
    std::size_t n_vars() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t n_obs() const noexcept { return static_cast<std::size_t>(values_.rows()) - pad_; }
    std::size_t pad() const noexcept { return pad_; }
    std::size_t total_rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }

    /// Labels are always populated; defaults are x1..xN.
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    Matrix values_;
    std::size_t pad_;
    std::vector<std::string> labels_;
};

/**
 * Regression arrays for one horizon of the local projection
 * x_{t+h} = A_1 x_t + ... + A_p x_{t-p+1} + u_{t,h}.
 *
 * Row t of X is (x_t', x_{t-1}', ..., x_{t-p+1}'), row t of Y is x_{t+h}'.
 * Column k*N + m of X is variable m at lag k.
 */
struct LpDesign
{
    std::size_t horizon = 0;
    std::size_t lags = 0;
    std::size_t n_vars = 0;
    Matrix X;
    Matrix Y;

    std::size_t effective_obs() const noexcept { return static_cast<std::size_t>(X.rows()); }
    std::size_t n_regressors() const noexcept { return static_cast<std::size_t>(X.cols()); }
};

struct CsvOptions
{
    bool has_header = true;
    bool skip_first_column = false; ///< e.g. a date column
    char delimiter = ',';
};

PanelSeries load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
PanelSeries parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes all rows (pad included) with a header row; values use 17
/// significant digits so a reload is exact.
void write_csv(const PanelSeries& series, const std::filesystem::path& path);
std::string to_csv(const PanelSeries& series);

/// Shortest 17-significant-digit representation used by every writer.
std::string format_real(double value);

/// Column-wise z-scores over all rows (pad included), sample variance with
/// divisor n - 1.
PanelSeries standardize(const PanelSeries& series);

/**
 * Builds the design for `lags` lags at horizon `horizon`.
 *
 * `align_lags` (>= lags) fixes the first usable row as if `align_lags` lags
 * were needed, so designs for different lag orders share one sample. The
 * first row used is `max(lags, align_lags) - 1`, so pad rows serve as lags
 * and unpadded data gives up its first p - 1 rows.
 */
LpDesign build_design(const PanelSeries& series, std::size_t lags, std::size_t horizon,
                      std::size_t align_lags = 0);

} // namespace hdlp
