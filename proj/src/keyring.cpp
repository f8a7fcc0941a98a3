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

#include "cure/keyring.hpp"

#include "json.hpp"

namespace cure {

std::string keyring_to_json(const Ecosystem& e, const SignatureScheme& scheme) {
  nlohmann::json j;
  j["scheme"] = scheme.name();
  j["store_root_sk"] = to_hex(e.store_root_sk);
  j["store_root"] = to_hex(e.store_root);
  j["provider_sk"] = to_hex(e.provider_sk);
  j["provider_cert"] = to_hex(e.provider_cert.serialize());
  j["vendor_root_sk"] = to_hex(e.vendor_root_sk);
  j["vendor_root"] = to_hex(e.vendor_root);
  j["device_sk"] = to_hex(e.device_sk);
  j["device_cert"] = to_hex(e.device_cert.serialize());
  return j.dump(2) + "\n";
}

Result<Ecosystem> keyring_from_json(std::string_view text, std::string* scheme_name) {
  nlohmann::json j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return MakeError(ErrorCode::kMalformed, "keyring is not a JSON object");
  }
  auto field = [&](const char* key, std::size_t n, Bytes& out) -> Status {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || !from_hex(it->get<std::string>(), out) ||
        out.size() != n) {
      return MakeError(ErrorCode::kMalformed, std::string("keyring field ") + key);
    }
    return {};
  };
  auto array = [&](const char* key, auto& out) -> Status {
    Bytes b;
    if (Status s = field(key, out.size(), b); !s) return s;
    std::copy(b.begin(), b.end(), out.begin());
    return {};
  };
  auto cert = [&](const char* key, Certificate& out) -> Status {
    Bytes b;
    if (Status s = field(key, Certificate::kBytes, b); !s) return s;
    Result<Certificate> c = Certificate::Parse(b);
    if (!c.ok()) return c.error();
    out = *c;
    return {};
  };
  Ecosystem e;
  for (Status s : {array("store_root_sk", e.store_root_sk), array("store_root", e.store_root),
                   array("provider_sk", e.provider_sk), cert("provider_cert", e.provider_cert),
                   array("vendor_root_sk", e.vendor_root_sk), array("vendor_root", e.vendor_root),
                   array("device_sk", e.device_sk), cert("device_cert", e.device_cert)}) {
    if (!s) return s.error();
  }
  if (scheme_name) {
    auto it = j.find("scheme");
    *scheme_name = it != j.end() && it->is_string() ? it->get<std::string>() : "";
  }
  return e;
}

}  // namespace cure
