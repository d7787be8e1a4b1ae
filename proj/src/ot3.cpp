// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/ot3.hpp"

#include <stdexcept>
#include <string>

#include "pmdi/errors.hpp"

namespace pmdi::ot3 {

bool client_round1(bool choice, bool mask_bit) noexcept { return choice != mask_bit; }

MaskedLabels garbler_round2(bool masked_choice, const Label& k0, const Label& k1, const Label& u0,
                            const Label& u1) {
  if (k0.bits() != k1.bits() || k0.bits() != u0.bits() || k0.bits() != u1.bits()) {
    throw std::invalid_argument("garbler_round2: label and mask widths differ");
  }
  const Label& u_first = masked_choice ? u1 : u0;
  const Label& u_second = masked_choice ? u0 : u1;
  return {k0 ^ u_first, k1 ^ u_second};
}

Label client_round3(bool choice, const MaskedLabels& blobs) { return choice ? blobs.second : blobs.first; }

Label evaluator_finish(const Label& blob, const Label& u0, const Label& u1, bool mask_bit) {
  return blob ^ (mask_bit ? u1 : u0);
}

Label run(const OtSession& s) {
  const bool m = client_round1(s.choice, s.mask_bit);
  const MaskedLabels blobs = garbler_round2(m, s.k0, s.k1, s.masks.u0, s.masks.u1);
  return evaluator_finish(client_round3(s.choice, blobs), s.masks.u0, s.masks.u1, s.mask_bit);
}

bool ChoiceMaskStream::mask_bit(std::uint64_t session) const {
  Prg prg(seed_, session);
  return prg.next_bit();
}

Masks LabelMaskStream::masks(std::uint64_t session) const {
  Prg prg(seed_, session);
  Label u0 = Label::random(kappa_, prg);
  Label u1 = Label::random(kappa_, prg);
  return {u0, u1};
}

void SessionGuard::claim(std::uint64_t session) {
  std::lock_guard lock(mu_);
  if (!used_.insert(session).second) {
    throw ProtocolError("OT session " + std::to_string(session) + " reused");
  }
}

bool SessionGuard::used(std::uint64_t session) const {
  std::lock_guard lock(mu_);
  return used_.count(session) != 0;
}

}  // namespace pmdi::ot3
