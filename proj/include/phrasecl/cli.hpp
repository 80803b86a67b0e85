// Copyright 2026 The Phrasecl Authors.
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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace phrasecl {

// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "PHRASECL_OUT_DIR";

// FNV-1a of the file contents as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

// Entry point of the `phrasecl` tool. Returns the process exit code: 0 on
// success, 2 for a usage error, 3..9 for a categorized library error.
// args[0] is the program name, as in argv.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phrasecl
