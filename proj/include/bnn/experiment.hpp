#ifndef BNN_EXPERIMENT_HPP
#define BNN_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bnn/data.hpp"
#include "bnn/errors.hpp"
#include "bnn/hmc.hpp"
#include "bnn/model.hpp"
#include "bnn/vi.hpp"

namespace bnn::exp {

// Raised when a pipeline stage cannot find outputs of an earlier stage.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

enum class InferenceMethod { Advi, Nuts };
std::string to_string(InferenceMethod m);

struct DatasetSpec {
  std::string kind;  // sine | sine-ood-complement | related | lgbb | lgbb-surrogate
  Eigen::Index n_train = 500;
  Eigen::Index n_test = 100;
  double x_low = 0.0;
  double x_high = 2.0;
  double noise_variance = 0.25;
  std::string path;               // lgbb: CSV location
  Eigen::Index surrogate_n = 3167;
  std::string split = "random";   // lgbb: random | beta4
  double train_fraction = 0.8;
  std::optional<bool> standardize;  // default: on for lgbb*, off otherwise

  bool is_lgbb() const { return kind == "lgbb" || kind == "lgbb-surrogate"; }
  bool standardize_effective() const { return standardize.value_or(is_lgbb()); }
};

struct ModelGrid {
  std::vector<int> widths = {20};
  std::vector<int> depths = {1};
  std::vector<Activation> activations = {Activation::ReLU};
  std::vector<PriorFamily> priors = {PriorFamily::Gaussian};
};

struct InferenceSpec {
  std::vector<InferenceMethod> methods = {InferenceMethod::Advi};
  // Zero means "use the published schedule for this grid cell".
  int vi_iterations = 0;
  double vi_learning_rate = 0.0;
  int hmc_warmup = 0;
  int hmc_samples = 0;
  int hmc_chains = 1;
  Eigen::Index predictive_draws = 1000;
};

struct CombineSpec {
  int n_seeds = 0;  // 0 disables combination
  std::vector<std::string> methods;  // subset of {DE, pBMA, stack}

  bool enabled() const { return n_seeds > 0; }
};

struct ExperimentSpec {
  std::string name;
  DatasetSpec dataset;
  ModelGrid model;
  InferenceSpec inference;
  CombineSpec combine;
  std::uint64_t master_seed = 0;

  void validate() const;
  static ExperimentSpec from_json_text(const std::string& text);
  static ExperimentSpec from_json_file(const std::filesystem::path& path);
  std::string canonical_json() const;
  std::string config_hash() const;
};

// Published per-width/depth schedules. Widths outside the printed table fall
// back to 10^4 iterations.
int vi_iterations_for(int width, int depth, const DatasetSpec& dataset);
double vi_learning_rate_for(const DatasetSpec& dataset);
// Single-model sweeps start from the zero vector; ensemble members from
// random points so independent seeds explore different ELBO basins.
vi::InitMode vi_init_mode_for(bool ensemble_member);
int hmc_samples_for(int width, int depth);
inline constexpr int kHmcWarmupDefault = 1000;

// One grid cell x ensemble member.
struct RunPlan {
  std::size_t index = 0;  // deterministic enumeration order
  NetworkConfig config;
  InferenceMethod method = InferenceMethod::Advi;
  int member = 0;
  int width = 0;
  int depth = 0;
  std::string run_id;
};

std::vector<RunPlan> enumerate_runs(const ExperimentSpec& spec);

// Materialized dataset pair (original scale plus the fitted transform).
struct PreparedData {
  Dataset train, test;          // original scale
  Dataset train_s, test_s;      // model scale (equal to the originals if no transform)
  std::optional<data::Standardizer> transform;
};

PreparedData prepare_data(const ExperimentSpec& spec);

struct StageOptions {
  std::filesystem::path out_dir;
  int jobs = 1;
  double scale = 1.0;  // multiplies iteration/sample counts, floor 1
  bool force = false;
};

// Pipeline stages. Each returns normally or throws
// (ConfigError/MissingArtifactError/NumericError map to exit codes 2/3/4).
void run_fit(const ExperimentSpec& spec, const StageOptions& opt);
void run_predict(const ExperimentSpec& spec, const StageOptions& opt);
void run_assess(const ExperimentSpec& spec, const StageOptions& opt);
void run_combine(const ExperimentSpec& spec, const StageOptions& opt);

// Named end-to-end reproductions of the published experiment designs.
std::vector<std::string> reproduction_names();
ExperimentSpec reproduction_spec(const std::string& name, const std::string& lgbb_path = "");
void run_reproduce(const std::string& name, const StageOptions& opt,
                   std::uint64_t master_seed = 0, const std::string& lgbb_path = "");

}  // namespace bnn::exp

#endif  // BNN_EXPERIMENT_HPP
