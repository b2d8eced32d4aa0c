// Copyright 2026 The semtag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace semtag {

struct HttpResult {
    int status = 0;       // 0 when the connection itself failed
    std::string body;
    std::string error;    // transport-level failure description
};

/// Blocking JSON POST. `endpoint` is scheme://host[:port].
HttpResult http_post_json(const std::string& endpoint, const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body, int timeout_s);

/// Reads an API credential from the named environment variable; empty if unset.
std::string credential_from_env(const std::string& var);

}  // namespace semtag
