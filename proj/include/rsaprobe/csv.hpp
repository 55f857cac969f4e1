// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rsaprobe::csv {

using Row = std::vector<std::string>;

/// RFC 4180 parsing: quoted fields may hold the delimiter, doubled quotes and
/// newlines. CRLF line ends are accepted; blank lines are skipped.
std::vector<Row> parse(std::string_view text, char delimiter = ',');

/// Quotes the field only when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter = ',');

std::string join(const Row& row, char delimiter = ',');

/// Column position by header name, or -1.
int column(const Row& header, std::string_view name);

}  // namespace rsaprobe::csv
