#include "cosmic/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cosmic/trainer.hpp"

namespace cosmic {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

Conversation random_conversation(const ModelDims& dims, std::size_t utterances, std::size_t speakers,
                                 std::mt19937_64& rng) {
  if (utterances == 0 || speakers == 0) throw UsageError("random_conversation: empty conversation");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> speaker_dist(0, speakers - 1);
  std::uniform_int_distribution<std::size_t> label_dist(0, dims.classes - 1);
  const auto row = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = gauss(rng);
    return Tensor::row(std::move(v));
  };
  Conversation c;
  c.id = "random";
  for (std::size_t k = 0; k < speakers; ++k) c.speakers.push_back("p" + std::to_string(k));
  for (std::size_t t = 0; t < utterances; ++t) {
    FeatureBundle f{row(dims.utterance),   row(dims.commonsense), row(dims.commonsense),
                    row(dims.commonsense), row(dims.commonsense), row(dims.commonsense)};
    const std::size_t s = t < speakers && utterances >= speakers ? t : speaker_dist(rng);
    c.turns.push_back(Turn{std::move(f), s});
    c.labels.push_back(label_dist(rng));
    c.shifted.push_back(false);
  }
  return c;
}

namespace {

double loss_only(const CosmicParams& params, const Conversation& conv, const Ablation& ablation) {
  ad::Tape tape;
  const BoundModel model = bind_frozen(tape, params);
  const ForwardResult r = forward(tape, model, conv.turns, conv.num_speakers(), {ablation});
  return conversation_loss(r.logits, conv.labels).value()[0];
}

}  // namespace

GradCheckReport check_gradients(CosmicParams& params, const Conversation& conv, double step, double tolerance,
                                const Ablation& ablation) {
  const auto start = std::chrono::steady_clock::now();
  params.zero_grad();
  accumulate_gradients(params, conv, ForwardOptions{ablation});

  GradCheckReport report;
  report.passed = true;
  for (auto& [name, tensor] : params.named_parameters()) {
    TensorCheck check;
    check.name = name;
    check.elements = tensor->size();
    const std::vector<double> analytic(tensor->grad().begin(), tensor->grad().end());
    auto w = tensor->data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + step;
      const double up = loss_only(params, conv, ablation);
      w[i] = saved - step;
      const double down = loss_only(params, conv, ablation);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      if (i == 0 || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
    }
    check.passed = check.max_rel_error < tolerance;
    report.passed = report.passed && check.passed;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  params.zero_grad();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
  std::mt19937_64 rng(config.seed);
  CosmicParams params = CosmicParams::initialized(config.dims, config.mode, rng());
  const Conversation conv = random_conversation(config.dims, config.utterances, config.speakers, rng);
  return check_gradients(params, conv, config.step, config.tolerance, config.ablation);
}

}  // namespace cosmic
