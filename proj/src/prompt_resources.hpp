#pragma once

#include <cstddef>
#include <string_view>

namespace termeval::oracle::detail {

struct PromptResource {
  const char* name;
  std::string_view text;
};

extern const PromptResource kPromptResources[];
extern const std::size_t kPromptResourceCount;

}  // namespace termeval::oracle::detail
