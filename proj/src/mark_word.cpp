/*
 * Copyright (c) The cjm authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cjm/mark_word.hpp"

namespace cjm {

MarkVariant decode(MarkWord word) {
  if (word.is_neutral()) return Neutral{};
  if (word.is_hashed()) return Hashed{word.hash()};
  return Queued{word.tail()};
}

MarkWord encode(const MarkVariant& variant) {
  struct Encoder {
    MarkWord operator()(Neutral) const { return MarkWord::neutral(); }
    MarkWord operator()(Hashed h) const { return MarkWord::hashed(h.hash); }
    MarkWord operator()(Queued q) const { return MarkWord::queued(q.tail); }
  };
  return std::visit(Encoder{}, variant);
}

}  // namespace cjm
