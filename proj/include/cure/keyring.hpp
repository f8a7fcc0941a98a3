/*
 * Copyright 2026 The cure-sim Authors
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

#ifndef CURE_KEYRING_HPP_
#define CURE_KEYRING_HPP_

#include <string>
#include <string_view>

#include "cure/package.hpp"

namespace cure {

// JSON keyring holding every ecosystem key and certificate as hex, plus the
// signature scheme name it was generated for.
std::string keyring_to_json(const Ecosystem& ecosystem, const SignatureScheme& scheme);
// Malformed when a field is missing or has the wrong length.
Result<Ecosystem> keyring_from_json(std::string_view text, std::string* scheme_name = nullptr);

}  // namespace cure

#endif  // CURE_KEYRING_HPP_
