#pragma once

// Three-phase training of the joint objective
//   Loss = lambda * 1(t_r) * L_R + 1(t_e) * L_est
// Phase 1 (burn-in) trains the autoencoder alone. Phase 2 trains both parts,
// adding L_est on even-indexed mini-batches only while lambda decays as
// exp(-epoch). Phase 3 freezes the autoencoder and fine-tunes the estimator
// while gamma ramps linearly from 1 to gamma_max.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "chadkit/data.hpp"
#include "chadkit/model.hpp"
#include "chadkit/negsampler.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::train {

struct TrainSchedule {
  int phase1_epochs = 50;
  int phase2_epochs = 10;
  int phase3_epochs = 25;
  double learning_rate = 5e-4;
  int batch_size = 256;
  double gamma_max = 2.0;
  bool secondary_noise = true;
  negsample::NegSamplerConfig negatives;

  void validate() const;
};

struct Gates {
  bool reconstruction = false;  // 1(t_r)
  bool estimator = false;       // 1(t_e)

  friend bool operator==(const Gates&, const Gates&) = default;
};

// Phase 1: (1,0). Phase 2: (1,1) on even batch indices, (1,0) on odd.
// Phase 3: (0,1).
Gates gates_for(int phase, std::size_t batch_index);

// 1 in phase 1, exp(-epoch) in phase 2 (epoch counted from 0), 0 in phase 3.
double lambda_for(int phase, int epoch);

// 1 outside phase 3; inside it a linear ramp reaching gamma_max on the last
// epoch (a single phase-3 epoch uses gamma_max directly).
double gamma_for(const TrainSchedule& schedule, int phase, int epoch);

double combine_joint_loss(Gates gates, double lambda, double reconstruction, double estimator);

struct ModelGrad {
  model::AutoencoderGrad autoencoder;
  nn::MlpGrad estimator;

  static ModelGrad for_model(const model::ChadModel& m);
  void zero();
};

struct JointLoss {
  double total = 0.0;
  std::optional<double> reconstruction;
  std::optional<double> estimator;
};

struct JointLossOptions {
  Gates gates;
  double lambda = 1.0;
  double gamma = 1.0;
  int negatives_per_record = 1;
  // p x (B*K) secondary noise added to negative latents; null disables it.
  const model::Matrix* noise = nullptr;
  // Null runs every network in inference mode.
  Rng* dropout_rng = nullptr;
  // False freezes the autoencoder: it runs in inference mode and receives
  // no gradient.
  bool autoencoder_trainable = true;
};

// Evaluates the gated joint loss on one mini-batch. `negatives` holds B*K
// records with the K negatives of record b in columns [b*K, (b+1)*K). Terms
// whose gate is off are not computed. Gradients are accumulated into grad
// when it is non-null.
JointLoss joint_loss(const model::ChadModel& model, const model::Batch& batch,
                     const model::Batch& negatives, const JointLossOptions& options,
                     ModelGrad* grad);

struct TrainLogEntry {
  int phase = 0;
  int epoch = 0;
  std::size_t batch = 0;
  Gates gates;
  double lambda = 0.0;
  double gamma = 0.0;
  std::optional<double> reconstruction_loss;
  std::optional<double> estimator_loss;

  std::string to_json() const;
};

class Trainer {
 public:
  // `train` must already be normalized and encoded against model's
  // vocabularies.
  Trainer(model::ChadModel& model, const data::Dataset& train, TrainSchedule schedule,
          SeedStreams seeds);

  void run_phase1();
  void run_phase2();
  void run_phase3();
  void run();

  std::function<void(const TrainLogEntry&)> on_batch;
  std::function<void(int phase, const model::ChadModel&)> on_phase_end;

  const TrainSchedule& schedule() const { return schedule_; }
  const nn::AdamState& autoencoder_optimizer() const { return ae_opt_; }
  const nn::AdamState& estimator_optimizer() const { return est_opt_; }

 private:
  void run_phase(int phase, int epochs);

  model::ChadModel& model_;
  const data::Dataset& train_;
  TrainSchedule schedule_;
  SeedStreams seeds_;
  negsample::NegativeSampler sampler_;
  nn::AdamState ae_opt_;
  nn::AdamState est_opt_;
};

}  // namespace chadkit::train
