#pragma once

#include "dxcast/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dxcast {

enum class EtsError { Additive, Multiplicative };
enum class EtsTrend { None, Additive, AdditiveDamped };

// One error/trend candidate from the non-seasonal ETS family.
struct EtsSpec {
    EtsError error = EtsError::Additive;
    EtsTrend trend = EtsTrend::None;
};

// The six candidates, in the fixed order used for AICc tie-breaks:
// (A,N), (A,A), (A,Ad), (M,N), (M,A), (M,Ad).
const std::vector<EtsSpec>& ets_candidates();

// Fitted innovations state-space model (or one of the degenerate fallbacks).
struct EtsModel {
    EtsError error_type = EtsError::Additive;
    EtsTrend trend_type = EtsTrend::None;
    double alpha = 0.0;  // level smoothing, [1e-4, 0.9999]
    double beta = 0.0;   // trend smoothing, [1e-4, alpha]; 0 when trendless
    double phi = 1.0;    // damping, [0.8, 0.98]; 1 when undamped
    double level0 = 0.0;
    double trend0 = 0.0;
    double level_n = 0.0;  // final states, the forecast origin
    double trend_n = 0.0;
    double loglik = 0.0;
    double aicc = 0.0;
    int n_obs = 0;
    int n_params = 0;  // free parameters incl. initial states and variance
    bool converged = true;
    bool fallback_naive = false;    // series too short; forecasts repeat the last value
    bool fallback_rwdrift = false;  // no admissible candidate; random walk with drift

    // "ETS(A,Ad)" etc., or "naive" / "rwdrift" for the fallbacks.
    std::string tag() const;
};

// Point forecasts for one score series.
struct ScoreForecast {
    Eigen::VectorXd point;
    std::string model_tag;
};

// Maximum-likelihood fit of one candidate via multi-start Nelder-Mead.
// Returns nullopt when the spec is inadmissible for this series: a
// multiplicative error with zeros or sign changes in the series, or too few
// observations for the AICc correction (n - k - 1 <= 0).
std::optional<EtsModel> fit_ets(const Eigen::Ref<const Eigen::VectorXd>& series,
                                const EtsSpec& spec);

// Every candidate paired with its fit (nullopt where inadmissible), in
// candidate order.  Mostly useful for diagnostics dumps.
std::vector<std::pair<EtsSpec, std::optional<EtsModel>>> fit_ets_candidates(
    const Eigen::Ref<const Eigen::VectorXd>& series);

// Minimum-AICc model over the admissible candidates; ties keep the earlier
// candidate.  Falls back to a naive last-value model when n < 4 and to a
// random walk with drift when no candidate is admissible.
EtsModel select_ets(const Eigen::Ref<const Eigen::VectorXd>& series);

// h-step-ahead point forecasts, h = 1..H, from the final states.
ScoreForecast forecast_ets(const EtsModel& model, int H);

}  // namespace dxcast
