// JSON model and feature files, episode CSV and run summaries.
#pragma once

#include "omdp/features.hpp"
#include "omdp/harness.hpp"

#include <json.hpp>

#include <string>

namespace omdp {

using Json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// %.17g, "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double x);

/// {"states", "actions", "transition": [[...] per pair], "initial": [...]}
Json model_to_json(const MdpModel& model);
MdpModel model_from_json(const Json& j);
MdpModel load_model(const std::string& path);
void save_model(const MdpModel& model, const std::string& path);

/// {"pairs", "weight_cap", "columns": [[[row, value], ...], ...]}
Json feature_map_to_json(const FeatureMap& phi);
FeatureMap feature_map_from_json(const Json& j);
FeatureMap load_feature_map(const std::string& path);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Columns t,s,a,reward,cum_reward,benchmark_cum,regret,flow_l1,shortfall_l1,entropy,inner_iters,expected_cum_reward.
/// regret uses the expected cumulative reward when it is tracked; cells without a benchmark are empty.
std::string episode_csv(const EpisodeLog& log);

/// Finite numbers as numbers, everything else as null.
Json number_or_null(double x);

Json bound_check_to_json(const BoundCheck& check);
Json report_to_json(const EpisodeLog& log, const RegretReport& report);

}  // namespace omdp
