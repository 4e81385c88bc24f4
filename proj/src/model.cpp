#include "cosmic/model.hpp"

#include <algorithm>

namespace cosmic {

void FeatureBundle::validate(std::size_t utterance_dim, std::size_t commonsense_dim) const {
  require_shape(utterance, {1, utterance_dim}, "utterance features");
  require_shape(intent, {1, commonsense_dim}, "intent commonsense");
  require_shape(effect_speaker, {1, commonsense_dim}, "effect-on-speaker commonsense");
  require_shape(react_speaker, {1, commonsense_dim}, "reaction-of-speaker commonsense");
  require_shape(effect_listener, {1, commonsense_dim}, "effect-on-listeners commonsense");
  require_shape(react_listener, {1, commonsense_dim}, "reaction-of-listeners commonsense");
}

std::string to_string(Mode m) {
  return m == Mode::unidirectional ? "uni" : "bi";
}

Mode parse_mode(const std::string& s) {
  if (s == "uni" || s == "unidirectional") return Mode::unidirectional;
  if (s == "bi" || s == "bidirectional") return Mode::bidirectional;
  throw UsageError("unknown mode '" + s + "' (expected uni or bi)");
}

StateCells::StateCells(const ModelDims& d)
    : context(d.hidden, d.utterance + 2 * d.hidden),
      internal(d.hidden, d.hidden + d.commonsense),
      external(d.hidden, d.hidden + d.utterance + d.commonsense),
      intent(d.hidden, d.commonsense + d.hidden),
      emotion(d.hidden, d.utterance + 3 * d.hidden),
      attention(d.utterance, d.hidden) {}

namespace {

void require_dims(const ModelDims& d) {
  if (d.utterance == 0 || d.commonsense == 0 || d.hidden == 0 || d.classes == 0) {
    throw UsageError("model dimensions must all be positive");
  }
}

template <typename Cells, typename Fn>
void for_each_cell(Cells& cells, const std::string& prefix, Fn&& fn) {
  const auto gru = [&](auto& g, const char* name) {
    fn(prefix + name + ".input_weights", g.input_weights);
    fn(prefix + name + ".hidden_weights", g.hidden_weights);
    fn(prefix + name + ".biases", g.biases);
  };
  gru(cells.context, "gru_c");
  gru(cells.internal, "gru_q");
  gru(cells.external, "gru_r");
  gru(cells.intent, "gru_i");
  gru(cells.emotion, "gru_e");
  fn(prefix + "attn_proj.weight", cells.attention.weight);
  fn(prefix + "attn_proj.bias", cells.attention.bias);
}

void init_cells(StateCells& cells, std::mt19937_64& rng) {
  for (GruParams* g : {&cells.context, &cells.internal, &cells.external, &cells.intent, &cells.emotion}) {
    init_uniform(*g, rng);
  }
  init_uniform(cells.attention, rng);
}

}  // namespace

CosmicParams::CosmicParams(const ModelDims& dims, Mode mode)
    : dims_(dims), mode_(mode), forward_((require_dims(dims), dims)) {
  if (mode == Mode::bidirectional) backward_.emplace(dims);
  classifier_ = LinearParams(dims.classes, mode == Mode::bidirectional ? 2 * dims.hidden : dims.hidden);
}

CosmicParams CosmicParams::initialized(const ModelDims& dims, Mode mode, std::uint64_t seed) {
  CosmicParams p(dims, mode);
  std::mt19937_64 rng(seed);
  init_cells(p.forward_, rng);
  if (p.backward_) init_cells(*p.backward_, rng);
  init_uniform(p.classifier_, rng);
  return p;
}

StateCells& CosmicParams::backward_cells() {
  if (!backward_) throw UsageError("unidirectional model has no backward cells");
  return *backward_;
}

const StateCells& CosmicParams::backward_cells() const {
  if (!backward_) throw UsageError("unidirectional model has no backward cells");
  return *backward_;
}

std::vector<std::pair<std::string, Tensor*>> CosmicParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  const auto push = [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); };
  for_each_cell(forward_, "", push);
  if (backward_) for_each_cell(*backward_, "backward.", push);
  push("classifier.weight", classifier_.weight);
  push("classifier.bias", classifier_.bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> CosmicParams::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<CosmicParams*>(this)->named_parameters()) out.emplace_back(name, t);
  return out;
}

std::size_t CosmicParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t->size();
  return n;
}

void CosmicParams::zero_grad() {
  for (auto& [name, t] : named_parameters()) t->zero_grad();
}

namespace {

std::vector<std::pair<std::string, Shape>> expected_layout(const ModelDims& d, Mode mode) {
  const std::size_t h = d.hidden;
  std::vector<std::pair<std::string, Shape>> out;
  const auto cells = [&](const std::string& prefix) {
    const auto gru = [&](const char* name, std::size_t input) {
      out.emplace_back(prefix + name + ".input_weights", Shape{3 * h, input});
      out.emplace_back(prefix + name + ".hidden_weights", Shape{3 * h, h});
      out.emplace_back(prefix + name + ".biases", Shape{1, 3 * h});
    };
    gru("gru_c", d.utterance + 2 * h);
    gru("gru_q", h + d.commonsense);
    gru("gru_r", h + d.utterance + d.commonsense);
    gru("gru_i", d.commonsense + h);
    gru("gru_e", d.utterance + 3 * h);
    out.emplace_back(prefix + "attn_proj.weight", Shape{d.utterance, h});
    out.emplace_back(prefix + "attn_proj.bias", Shape{1, d.utterance});
  };
  cells("");
  if (mode == Mode::bidirectional) cells("backward.");
  const std::size_t features = mode == Mode::bidirectional ? 2 * h : h;
  out.emplace_back("classifier.weight", Shape{d.classes, features});
  out.emplace_back("classifier.bias", Shape{1, d.classes});
  return out;
}

}  // namespace

void CosmicParams::validate() const {
  require_dims(dims_);
  const auto mine = named_parameters();
  const auto want = expected_layout(dims_, mode_);
  if (mine.size() != want.size()) throw ValidationError("parameter set does not match the model layout");
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (mine[k].second->shape() != want[k].second) {
      throw ValidationError(mine[k].first + " has shape " + to_string(mine[k].second->shape()) +
                            ", expected " + to_string(want[k].second));
    }
  }
}

bool operator==(const CosmicParams& a, const CosmicParams& b) {
  if (a.dims_ != b.dims_ || a.mode_ != b.mode_) return false;
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k].first != pb[k].first || !(*pa[k].second == *pb[k].second)) return false;
  }
  return true;
}

namespace {

BoundCells bind_cells(ad::Tape& tape, StateCells& c) {
  return BoundCells{bind(tape, c.context), bind(tape, c.internal), bind(tape, c.external),
                    bind(tape, c.intent),  bind(tape, c.emotion),  bind(tape, c.attention)};
}

BoundCells bind_cells_frozen(ad::Tape& tape, const StateCells& c) {
  return BoundCells{bind_frozen(tape, c.context), bind_frozen(tape, c.internal),
                    bind_frozen(tape, c.external), bind_frozen(tape, c.intent),
                    bind_frozen(tape, c.emotion),  bind_frozen(tape, c.attention)};
}

}  // namespace

BoundModel bind(ad::Tape& tape, CosmicParams& params) {
  params.validate();
  BoundModel m{bind_cells(tape, params.forward_cells()), std::nullopt,
               cosmic::bind(tape, params.classifier()), params.dims()};
  if (params.mode() == Mode::bidirectional) m.backward = bind_cells(tape, params.backward_cells());
  return m;
}

BoundModel bind_frozen(ad::Tape& tape, const CosmicParams& params) {
  params.validate();
  BoundModel m{bind_cells_frozen(tape, params.forward_cells()), std::nullopt,
               cosmic::bind_frozen(tape, params.classifier()), params.dims()};
  if (params.mode() == Mode::bidirectional) m.backward = bind_cells_frozen(tape, params.backward_cells());
  return m;
}

ConversationState initial_state(ad::Tape& tape, const ModelDims& dims, std::size_t num_speakers) {
  if (num_speakers == 0) throw UsageError("conversation needs at least one participant");
  const ad::Var zero = tape.constant(Tensor({1, dims.hidden}));
  ConversationState s;
  s.context = zero;
  s.attention = zero;
  s.emotion = zero;
  s.participants.internal.assign(num_speakers, zero);
  s.participants.external.assign(num_speakers, zero);
  s.participants.intent.assign(num_speakers, zero);
  return s;
}

void step(ConversationState& state, const BoundCells& cells, const FeatureBundle& features,
          std::size_t speaker, const Ablation& ablation) {
  ParticipantStates& ps = state.participants;
  const std::size_t m = ps.internal.size();
  if (speaker >= m) {
    throw UsageError("speaker index " + std::to_string(speaker) + " outside " + std::to_string(m) +
                     " participants");
  }
  ad::Tape& tape = *state.context.tape();
  const std::size_t d_cs = cells.internal.input - cells.internal.hidden;
  features.validate(cells.attention.weight.shape().rows, d_cs);

  const ad::Var x = tape.alias(features.utterance);
  const auto channel = [&](const Tensor& v, bool ablated) {
    return ablated ? tape.constant(Tensor(v.shape())) : tape.alias(v);
  };
  const ad::Var intent_cs = channel(features.intent, ablation.no_speaker);
  const ad::Var effect_speaker = channel(features.effect_speaker, ablation.no_speaker);
  const ad::Var react_speaker = channel(features.react_speaker, ablation.no_speaker);
  const ad::Var effect_listener = channel(features.effect_listener, ablation.no_listener);
  const ad::Var react_listener = channel(features.react_listener, ablation.no_listener);

  // a_t pools c_1..c_{t-1} only.
  if (state.context_history.empty()) {
    state.attention = tape.constant(Tensor({1, cells.context.hidden}));
  } else {
    state.attention = soft_attention_cached(state.context_history, state.attention_keys, x).pooled;
  }
  const ad::Var a = state.attention;

  state.context = gru_step(cells.context, state.context,
                           ad::concat({x, ps.internal[speaker], ps.external[speaker]}));
  state.context_history.push_back(state.context);
  state.attention_keys.push_back(ad::tanh(linear(cells.attention, state.context)));

  for (std::size_t k = 0; k < m; ++k) {
    const ad::Var effect = k == speaker ? effect_speaker : effect_listener;
    ps.internal[k] = gru_step(cells.internal, ps.internal[k], ad::concat({a, effect}));
  }
  for (std::size_t k = 0; k < m; ++k) {
    const ad::Var react = k == speaker ? react_speaker : react_listener;
    ps.external[k] = gru_step(cells.external, ps.external[k], ad::concat({a, x, react}));
  }
  ps.intent[speaker] = gru_step(cells.intent, ps.intent[speaker], ad::concat({intent_cs, ps.internal[speaker]}));

  state.emotion = gru_step(cells.emotion, state.emotion,
                           ad::concat({x, ps.internal[speaker], ps.external[speaker], ps.intent[speaker]}));
}

std::size_t count_speakers(std::span<const Turn> turns) {
  std::size_t m = 0;
  for (const Turn& t : turns) m = std::max(m, t.speaker + 1);
  return m;
}

namespace {

std::vector<StepRecord> run_direction(ad::Tape& tape, const BoundCells& cells, const ModelDims& dims,
                                      std::span<const Turn> turns, std::size_t num_speakers,
                                      const Ablation& ablation, bool reversed) {
  ConversationState state = initial_state(tape, dims, num_speakers);
  std::vector<StepRecord> records;
  records.reserve(turns.size());
  for (std::size_t n = 0; n < turns.size(); ++n) {
    const Turn& turn = turns[reversed ? turns.size() - 1 - n : n];
    step(state, cells, turn.features, turn.speaker, ablation);
    records.push_back({state.attention, state.context, state.emotion, state.participants});
  }
  return records;
}

}  // namespace

ForwardResult forward(ad::Tape& tape, const BoundModel& model, std::span<const Turn> turns,
                      std::size_t num_speakers, const ForwardOptions& options) {
  if (turns.empty()) throw UsageError("forward: empty conversation");
  if (count_speakers(turns) > num_speakers) throw UsageError("forward: speaker index exceeds participant count");
  if (options.dropout > 0.0 && !options.rng) throw UsageError("forward: dropout needs an rng");

  ForwardResult out;
  out.forward_steps = run_direction(tape, model.forward, model.dims, turns, num_speakers, options.ablation, false);
  if (model.backward) {
    out.backward_steps = run_direction(tape, *model.backward, model.dims, turns, num_speakers, options.ablation, true);
  }
  const std::size_t n = turns.size();
  out.logits.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    ad::Var features = out.forward_steps[t].emotion;
    if (model.backward) features = ad::concat({features, out.backward_steps[n - 1 - t].emotion});
    if (options.dropout > 0.0) features = dropout(features, options.dropout, *options.rng);
    out.logits.push_back(linear(model.classifier, features));
  }
  return out;
}

ad::Var conversation_loss(std::span<const ad::Var> logits, std::span<const std::size_t> labels) {
  if (logits.empty()) throw UsageError("conversation_loss: no utterances");
  if (logits.size() != labels.size()) throw UsageError("conversation_loss: logits/labels length mismatch");
  ad::Var total = ad::cross_entropy(logits[0], labels[0]);
  for (std::size_t t = 1; t < logits.size(); ++t) total = ad::add(total, ad::cross_entropy(logits[t], labels[t]));
  return total;
}

std::vector<Tensor> infer_logits(const CosmicParams& params, std::span<const Turn> turns,
                                 const Ablation& ablation) {
  ad::Tape tape;
  const BoundModel model = bind_frozen(tape, params);
  const ForwardResult r = forward(tape, model, turns, count_speakers(turns), {ablation});
  std::vector<Tensor> out;
  out.reserve(r.logits.size());
  for (const ad::Var& v : r.logits) out.push_back(v.value());
  return out;
}

std::size_t predict(const Tensor& logits) {
  const auto v = logits.data();
  if (v.empty()) throw UsageError("predict: empty logits");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace cosmic
