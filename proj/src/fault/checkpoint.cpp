/* Copyright 2026 The gridflow Authors
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

#include "gridflow/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common/json_util.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

using detail::json;
using ojson = nlohmann::ordered_json;

std::string encode_checkpoint(const Checkpoint& c) {
  ojson header = {{"magic", kCheckpointMagic},
                  {"version", kCheckpointVersion},
                  {"mode", mode_name(c.mode)},
                  {"instance_id", c.instance_id},
                  {"t", c.at},
                  {"checkpoint_id", c.checkpoint_id}};
  ojson data = {{"replicas", catalog_to_json(c.data)}, {"store_bytes", c.store_bytes}};
  return header.dump() + "\n" + c.snapshot.dump() + "\n" + data.dump() + "\n";
}

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptCheckpoint, "corrupt checkpoint: " + what); }

}  // namespace

Checkpoint decode_checkpoint(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) corrupt("truncated record");
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.size() != 3) corrupt("expected 3 records, found " + std::to_string(lines.size()));

  try {
    const json header = json::parse(lines[0]);
    if (!header.is_object() || header.value("magic", "") != kCheckpointMagic) corrupt("bad magic");
    if (!header.contains("version") || !header["version"].is_number_integer()) corrupt("missing version");
    if (header["version"].get<int>() != kCheckpointVersion) {
      corrupt("unsupported version " + header["version"].dump());
    }
    Checkpoint c;
    const auto mode = parse_mode(detail::get_string(header, "mode", "header"));
    if (!mode) corrupt("unknown mode");
    c.mode = *mode;
    c.instance_id = detail::get_string(header, "instance_id", "header");
    c.at = detail::get_number(header, "t", "header");
    c.checkpoint_id = detail::get_string(header, "checkpoint_id", "header");
    c.snapshot = ojson::parse(lines[1]);
    if (!c.snapshot.is_object()) corrupt("snapshot is not an object");
    const json data = json::parse(lines[2]);
    c.data = catalog_from_json(detail::require(data, "replicas", "data"));
    c.store_bytes = detail::get_uint(data, "store_bytes", "data");
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    corrupt(e.what());
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
}

void write_checkpoint(const Checkpoint& c, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp + "'");
    out << encode_checkpoint(c);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename '" + tmp + "': " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

std::vector<std::string> missing_replicas(const Checkpoint& c, const ReplicaCatalog& current) {
  std::vector<std::string> missing;
  for (const auto& [lfn, list] : c.data.entries()) {
    for (const auto& r : list) {
      const auto* now = current.at_site(lfn, r.site);
      if (!now || now->path != r.path || (now->partial && !r.partial)) {
        missing.push_back(lfn);
        break;
      }
    }
  }
  return missing;
}

}  // namespace gridflow
