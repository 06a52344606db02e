#pragma once

#include <cstdint>
#include <utility>

#include "photon_correlator/error.hpp"
#include "photon_correlator/random.hpp"
#include "photon_correlator/timetag.hpp"

namespace phc {

// Probability that a photon leaves through arm B; arm A gets the rest.
struct SplitRatio {
  double transmission = 0.5;
};

struct SplitArms {
  TagStream a;
  TagStream b;
};

inline SplitArms beamsplit(const TagStream& stream, SplitRatio ratio, std::uint64_t seed) {
  if (!(ratio.transmission >= 0.0 && ratio.transmission <= 1.0)) {
    throw InvalidArgument("beamsplit: transmission must lie in [0, 1]");
  }
  require_sorted(stream, "beamsplit input");
  SplitArms out;
  out.a.duration_ps = out.b.duration_ps = stream.duration_ps;
  out.a.meta = out.b.meta = stream.meta;
  Rng rng(seed);
  for (const auto& tag : stream.tags) {
    (rng.bernoulli(ratio.transmission) ? out.b : out.a).tags.push_back(tag);
  }
  return out;
}

// Independent Bernoulli thinning.
inline TagStream attenuate(const TagStream& stream, double transmission, std::uint64_t seed) {
  if (!(transmission >= 0.0 && transmission <= 1.0)) {
    throw InvalidArgument("attenuate: transmission must lie in [0, 1]");
  }
  require_sorted(stream, "attenuate input");
  TagStream out;
  out.duration_ps = stream.duration_ps;
  out.meta = stream.meta;
  if (transmission == 1.0) {
    out.tags = stream.tags;
    return out;
  }
  Rng rng(seed);
  for (const auto& tag : stream.tags) {
    if (rng.bernoulli(transmission)) out.tags.push_back(tag);
  }
  return out;
}

}  // namespace phc
