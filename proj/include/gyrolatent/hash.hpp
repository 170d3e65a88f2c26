#pragma once

#include <string>
#include <string_view>

namespace gyrolatent {

std::string sha1_hex(std::string_view bytes);

/// Git blob object id of `content`: sha1("blob <size>\0" + content).
std::string git_blob_hash(std::string_view content);

}  // namespace gyrolatent
