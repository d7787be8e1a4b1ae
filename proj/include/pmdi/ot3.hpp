// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_set>

#include "pmdi/label.hpp"
#include "pmdi/prg.hpp"

// Three-party proxy OT. The client holds a choice bit i, the garbler holds labels
// k0 and k1, and the evaluator ends up with k_i. The client and evaluator share a
// seed for the bit mask b; the garbler and evaluator share a seed for masks u0, u1.
//
//   client    -> garbler   : i ^ b
//   garbler   -> client    : (k0 ^ u[i^b], k1 ^ u[!(i^b)])
//   client    -> evaluator : the entry equal to k_i ^ u_b
//   evaluator              : k_i = blob ^ u_b
namespace pmdi::ot3 {

struct MaskedLabels {
  Label first;   // k0 ^ u_{i^b}
  Label second;  // k1 ^ u_{!(i^b)}
};

struct Masks {
  Label u0;
  Label u1;
};

/// One transfer with every party's inputs; mainly for tests and tracing.
struct OtSession {
  std::uint64_t id = 0;
  bool choice = false;  // i, client
  bool mask_bit = false;  // b, client and evaluator
  Masks masks;  // garbler and evaluator
  Label k0, k1;  // garbler
};

bool client_round1(bool choice, bool mask_bit) noexcept;

/// Throws std::invalid_argument when label and mask widths differ.
MaskedLabels garbler_round2(bool masked_choice, const Label& k0, const Label& k1, const Label& u0,
                            const Label& u1);

Label client_round3(bool choice, const MaskedLabels& blobs);

Label evaluator_finish(const Label& blob, const Label& u0, const Label& u1, bool mask_bit);

/// Runs all three rounds for one session and returns what the evaluator recovers.
Label run(const OtSession& s);

/// b for a session, from the client/evaluator shared seed.
class ChoiceMaskStream {
 public:
  explicit ChoiceMaskStream(const Seed& seed) : seed_(seed) {}
  bool mask_bit(std::uint64_t session) const;

 private:
  Seed seed_;
};

/// (u0, u1) for a session, from the garbler/evaluator shared seed.
class LabelMaskStream {
 public:
  LabelMaskStream(const Seed& seed, unsigned kappa) : seed_(seed), kappa_(kappa) {}
  Masks masks(std::uint64_t session) const;
  unsigned kappa() const noexcept { return kappa_; }

 private:
  Seed seed_;
  unsigned kappa_;
};

/// Rejects a session id that was already used by this holder, so masks are never reused.
class SessionGuard {
 public:
  /// Throws ProtocolError on reuse.
  void claim(std::uint64_t session);
  bool used(std::uint64_t session) const;

 private:
  mutable std::mutex mu_;
  std::unordered_set<std::uint64_t> used_;
};

}  // namespace pmdi::ot3
