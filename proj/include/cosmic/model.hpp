#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cosmic/cells.hpp"
#include "cosmic/tape.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic {

// Per-utterance inputs: the context-independent utterance vector and the five
// commonsense relation vectors.
struct FeatureBundle {
  Tensor utterance;          // x_t, 1 × D_x
  Tensor intent;             // intent of speaker, 1 × D_cs
  Tensor effect_speaker;     // effect on speaker
  Tensor react_speaker;      // reaction of speaker
  Tensor effect_listener;    // effect on listeners
  Tensor react_listener;     // reaction of listeners

  void validate(std::size_t utterance_dim, std::size_t commonsense_dim) const;
  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

struct Turn {
  FeatureBundle features;
  std::size_t speaker = 0;  // dense index within the conversation

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct ModelDims {
  std::size_t utterance = 0;    // D_x
  std::size_t commonsense = 0;  // D_cs
  std::size_t hidden = 0;       // shared size of every state
  std::size_t classes = 0;      // C

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Mode { unidirectional, bidirectional };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

// Commonsense ablations. Speaker side zeroes intent/effect/reaction of the
// speaker; listener side zeroes effect/reaction of listeners.
struct Ablation {
  bool no_speaker = false;
  bool no_listener = false;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

// One direction's recurrent cells.
struct StateCells {
  GruParams context;   // gru_c
  GruParams internal;  // gru_q
  GruParams external;  // gru_r
  GruParams intent;    // gru_i
  GruParams emotion;   // gru_e
  LinearParams attention;  // attn_proj, H → D_x

  StateCells() = default;
  explicit StateCells(const ModelDims& d);
};

class CosmicParams {
 public:
  CosmicParams() = default;
  CosmicParams(const ModelDims& dims, Mode mode);

  // Uniform init per tensor from a single seeded stream.
  static CosmicParams initialized(const ModelDims& dims, Mode mode, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  Mode mode() const { return mode_; }

  StateCells& forward_cells() { return forward_; }
  const StateCells& forward_cells() const { return forward_; }
  StateCells& backward_cells();
  const StateCells& backward_cells() const;
  LinearParams& classifier() { return classifier_; }
  const LinearParams& classifier() const { return classifier_; }

  // Stable order; names match the checkpoint keys.
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
  std::size_t parameter_count() const;

  void zero_grad();
  void validate() const;

  friend bool operator==(const CosmicParams& a, const CosmicParams& b);

 private:
  ModelDims dims_;
  Mode mode_ = Mode::unidirectional;
  StateCells forward_;
  std::optional<StateCells> backward_;
  LinearParams classifier_;
};

struct BoundCells {
  BoundGru context, internal, external, intent, emotion;
  BoundLinear attention;
};

struct BoundModel {
  BoundCells forward;
  std::optional<BoundCells> backward;
  BoundLinear classifier;
  ModelDims dims;
};

BoundModel bind(ad::Tape& tape, CosmicParams& params);
BoundModel bind_frozen(ad::Tape& tape, const CosmicParams& params);

struct ParticipantStates {
  std::vector<ad::Var> internal;  // q_k
  std::vector<ad::Var> external;  // r_k
  std::vector<ad::Var> intent;    // i_k
};

struct ConversationState {
  std::vector<ad::Var> context_history;  // c_1..c_t
  std::vector<ad::Var> attention_keys;   // tanh(W_s c_i + b_s), cached per c_i
  ad::Var context;                       // c_t (c_0 = 0)
  ad::Var attention;                     // a_t
  ad::Var emotion;                       // e_t (e_0 = 0)
  ParticipantStates participants;
};

ConversationState initial_state(ad::Tape& tape, const ModelDims& dims, std::size_t num_speakers);

// Advances the recurrence by one utterance, in this order: attention over
// c_1..c_{t-1} (zero when empty), context, internal, external, intent,
// emotion. Non-speaker intent states are left untouched.
void step(ConversationState& state, const BoundCells& cells, const FeatureBundle& features,
          std::size_t speaker, const Ablation& ablation);

// Snapshot of the states after each step, for inspection and testing.
struct StepRecord {
  ad::Var attention, context, emotion;
  ParticipantStates participants;
};

struct ForwardOptions {
  Ablation ablation;
  double dropout = 0.0;               // pre-classifier, training only
  std::mt19937_64* rng = nullptr;     // required when dropout > 0
};

struct ForwardResult {
  std::vector<ad::Var> logits;  // one 1 × C per utterance
  std::vector<StepRecord> forward_steps;
  std::vector<StepRecord> backward_steps;  // bidirectional only, in reversed time
};

std::size_t count_speakers(std::span<const Turn> turns);

ForwardResult forward(ad::Tape& tape, const BoundModel& model, std::span<const Turn> turns,
                      std::size_t num_speakers, const ForwardOptions& options = {});

// Summed cross-entropy over the conversation.
ad::Var conversation_loss(std::span<const ad::Var> logits, std::span<const std::size_t> labels);

// Inference helper: logits as plain tensors.
std::vector<Tensor> infer_logits(const CosmicParams& params, std::span<const Turn> turns,
                                 const Ablation& ablation = {});

// Argmax, lowest index on ties.
std::size_t predict(const Tensor& logits);

}  // namespace cosmic
