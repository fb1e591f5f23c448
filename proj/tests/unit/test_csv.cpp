#include <cmath>
#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "agshock/csv.hpp"

using namespace agshock;

TEST(Csv, ParsesHeaderAndRows) {
  const CsvTable t = parse_csv_table("date,value\n2020-01-01,1.5\n2020-01-02,2\n");
  ASSERT_EQ(t.header.size(), 2u);
  EXPECT_EQ(t.header[0], "date");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "2");
  EXPECT_EQ(t.column_index("value"), 1u);
  EXPECT_FALSE(t.column_index("missing").has_value());
}

TEST(Csv, HandlesQuotesCrlfBomAndBlankLines) {
  const CsvTable t = parse_csv_table("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\r\n3,\r\n");
  ASSERT_EQ(t.header.size(), 2u);
  EXPECT_EQ(t.header[0], "a");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
}

TEST(Csv, ParseDouble) {
  EXPECT_DOUBLE_EQ(*parse_double(" 2.5 "), 2.5);
  EXPECT_DOUBLE_EQ(*parse_double("-1e3"), -1000.0);
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("abc").has_value());
  EXPECT_FALSE(parse_double("1.5x").has_value());
}

TEST(Csv, FormatNumberUsesTwelveSignificantDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "");
  const double v = 123456.789012345;
  EXPECT_NEAR(*parse_double(format_number(v)), v, 1e-6);
}

TEST(Csv, WriteCreatesParentDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "agshock_csv_test";
  std::filesystem::remove_all(dir);
  write_text_file(dir / "a" / "b.txt", "hello\n");
  EXPECT_EQ(read_text_file(dir / "a" / "b.txt"), "hello\n");
  std::filesystem::remove_all(dir);
}
