#include "cosmic/synth.hpp"

#include <cmath>
#include <random>

namespace cosmic {

void SynthConfig::validate() const {
  if (train_dialogues + val_dialogues + test_dialogues == 0) throw UsageError("synth: no dialogues requested");
  if (min_speakers < 2 || min_speakers > max_speakers) throw UsageError("synth: need 2 <= min_speakers <= max_speakers");
  if (min_length < 1 || min_length > max_length) throw UsageError("synth: bad length range");
  if (classes < 2) throw UsageError("synth: need at least two classes");
  if (!(p_shift >= 0.0 && p_shift <= 1.0)) throw UsageError("synth: p_shift must lie in [0, 1]");
  if (!(noise > 0.0)) throw UsageError("synth: noise scale must be positive");
  if (!(stay_probability >= 0.0 && stay_probability <= 1.0)) throw UsageError("synth: stay_probability must lie in [0, 1]");
  if (utterance_dim == 0 || commonsense_dim == 0) throw UsageError("synth: dimensions must be positive");
}

namespace {

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < cfg.classes; ++k) {
      std::vector<double> mu(cfg.utterance_dim);
      double norm = 0.0;
      for (double& v : mu) {
        v = gauss(rng_);
        norm += v * v;
      }
      for (double& v : mu) v /= std::sqrt(norm);
      class_means_.push_back(std::move(mu));
    }
    // Commonsense embeddings live in a seeded random projection of the class means.
    std::vector<double> proj(cfg.commonsense_dim * cfg.utterance_dim);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.utterance_dim));
    for (double& v : proj) v = s * gauss(rng_);
    for (const auto& mu : class_means_) {
      std::vector<double> e(cfg.commonsense_dim, 0.0);
      for (std::size_t i = 0; i < cfg.commonsense_dim; ++i)
        for (std::size_t j = 0; j < cfg.utterance_dim; ++j) e[i] += proj[i * cfg.utterance_dim + j] * mu[j];
      class_cs_.push_back(std::move(e));
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < cfg.classes; ++k) {
      std::vector<double> row(cfg.classes);
      double rest = 0.0;
      for (std::size_t j = 0; j < cfg.classes; ++j) {
        if (j != k) rest += (row[j] = unit(rng_) + 0.1);
      }
      for (std::size_t j = 0; j < cfg.classes; ++j) {
        row[j] = j == k ? cfg.stay_probability : (1.0 - cfg.stay_probability) * row[j] / rest;
      }
      transitions_.emplace_back(row.begin(), row.end());
    }
  }

  std::vector<Conversation> split(const std::string& prefix, std::size_t count) {
    std::vector<Conversation> out;
    out.reserve(count);
    for (std::size_t d = 0; d < count; ++d) out.push_back(dialogue(prefix + "_" + std::to_string(d)));
    return out;
  }

 private:
  Tensor noisy(const std::vector<double>* mean, std::size_t dim) {
    std::normal_distribution<double> gauss(0.0, cfg_.noise);
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = (mean ? (*mean)[i] : 0.0) + gauss(rng_);
    return Tensor::row(std::move(v));
  }

  Conversation dialogue(const std::string& id) {
    std::uniform_int_distribution<std::size_t> speakers_dist(cfg_.min_speakers, cfg_.max_speakers);
    std::uniform_int_distribution<std::size_t> length_dist(cfg_.min_length, cfg_.max_length);
    std::uniform_int_distribution<std::size_t> class_dist(0, cfg_.classes - 1);
    std::bernoulli_distribution shift_dist(cfg_.p_shift);

    const std::size_t m = speakers_dist(rng_);
    const std::size_t n = length_dist(rng_);
    std::vector<std::size_t> planned(m);
    for (std::size_t& p : planned) p = class_dist(rng_);

    Conversation conv;
    conv.id = id;
    std::vector<std::size_t> dense(m, m);  // original speaker -> index of first appearance
    std::size_t prev_speaker = m;
    for (std::size_t t = 0; t < n; ++t) {
      std::size_t s;
      if (prev_speaker == m || m == 1) {
        s = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng_);
      } else {
        s = std::uniform_int_distribution<std::size_t>(0, m - 2)(rng_);
        if (s >= prev_speaker) ++s;
      }
      prev_speaker = s;
      if (dense[s] == m) {
        dense[s] = conv.speakers.size();
        conv.speakers.push_back("speaker_" + std::to_string(s));
      }

      const bool shift = t > 0 && shift_dist(rng_);
      std::size_t label = planned[s];
      if (shift) {
        label = std::uniform_int_distribution<std::size_t>(0, cfg_.classes - 2)(rng_);
        if (label >= planned[s]) ++label;
      }
      planned[s] = transitions_[label](rng_);

      FeatureBundle f;
      const std::vector<double>* mu = shift ? nullptr : &class_means_[label];
      const std::vector<double>* cs = shift ? nullptr : &class_cs_[label];
      f.utterance = noisy(mu, cfg_.utterance_dim);
      f.intent = noisy(shift ? nullptr : &class_cs_[planned[s]], cfg_.commonsense_dim);
      f.effect_speaker = noisy(cs, cfg_.commonsense_dim);
      f.react_speaker = noisy(cs, cfg_.commonsense_dim);
      f.effect_listener = noisy(nullptr, cfg_.commonsense_dim);
      f.react_listener = noisy(nullptr, cfg_.commonsense_dim);
      if (shift) conv.turns.back().features.react_listener = noisy(&class_cs_[label], cfg_.commonsense_dim);

      conv.turns.push_back(Turn{std::move(f), dense[s]});
      conv.labels.push_back(label);
      conv.shifted.push_back(shift);
    }
    return conv;
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::vector<double>> class_means_;
  std::vector<std::vector<double>> class_cs_;
  std::vector<std::discrete_distribution<std::size_t>> transitions_;
};

}  // namespace

SynthDataset synth_generate(const SynthConfig& config) {
  config.validate();
  Generator gen(config);
  SynthDataset out;
  out.data.train = gen.split("train", config.train_dialogues);
  out.data.val = gen.split("val", config.val_dialogues);
  out.data.test = gen.split("test", config.test_dialogues);
  for (std::size_t k = 0; k < config.classes; ++k) out.manifest.class_names.push_back("class_" + std::to_string(k));
  out.manifest.headline_metric = "accuracy";
  return out;
}

}  // namespace cosmic
