#pragma once

#include <cstddef>
#include <cstdint>

#include "cosmic/dataset.hpp"

namespace cosmic {

// Seeded generator for conversations whose emotion shifts can only be
// recovered from the reaction-of-listeners channel of the preceding turn.
//
// Story per dialogue: speakers alternate (never the same speaker twice in a
// row); each speaker carries a planned class drawn from a Markov chain. At
// turn t > 0 a shift happens with probability p_shift: the label jumps to a
// uniformly drawn class other than the planned one, the utterance and all
// speaker-side channels carry pure noise, and the previous turn's
// reaction-of-listeners channel carries the new class. Otherwise the label is
// the planned class, x, effect_speaker and react_speaker carry its embedding
// and intent carries the speaker's next planned class. effect_listener is
// always noise.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t train_dialogues = 300;
  std::size_t val_dialogues = 50;
  std::size_t test_dialogues = 50;
  std::size_t min_speakers = 2;
  std::size_t max_speakers = 3;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::size_t classes = 4;
  double p_shift = 0.3;
  double noise = 0.1;
  double stay_probability = 0.6;  // Markov self-transition mass
  std::size_t utterance_dim = 16;
  std::size_t commonsense_dim = 16;

  void validate() const;
};

struct SynthDataset {
  Dataset data;
  DatasetManifest manifest;  // split paths unset until written
};

SynthDataset synth_generate(const SynthConfig& config);

}  // namespace cosmic
