/* Copyright 2026 The uqdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "uqdet/detmodel.h"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "uqdet/error.h"

namespace uqdet {
namespace {

constexpr char kBox[] = "[0,0,0,4,2,1.5,0.3]";
constexpr char kLogVar[] = "[0,0,0,0,0,0,0]";

std::string DetJson(const std::string& extra = "") {
  return std::string("{\"box\":") + kBox + ",\"log_var\":" + kLogVar +
         ",\"logits\":[2,0,-1]" + extra + "}";
}

TEST(ClassDistributionTest, FromLogitsIsSoftmax) {
  const auto c = ClassDistribution::FromLogits({1.0, 2.0, 3.0});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(c.probs()[2], std::exp(3.0) / z, 1e-12);
  double sum = 0.0;
  for (double p : c.probs()) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(c.Argmax(), 2);
}

TEST(ClassDistributionTest, LargeLogitsDoNotOverflow) {
  const auto c = ClassDistribution::FromLogits({1000.0, 0.0});
  EXPECT_DOUBLE_EQ(c.probs()[0], 1.0);
  EXPECT_EQ(c.probs()[1], 0.0);
}

TEST(ClassDistributionTest, FromProbsValidatesAndKeepsLogs) {
  const auto c = ClassDistribution::FromProbs({0.25, 0.75});
  EXPECT_NEAR(c.logits()[0], std::log(0.25), 1e-15);
  const auto zero = ClassDistribution::FromProbs({1.0, 0.0});
  EXPECT_EQ(zero.logits()[1], kMinLogProb);
  try {
    ClassDistribution::FromProbs({0.5, 0.4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("distribution not normalized"), std::string::npos);
  }
  EXPECT_THROW(ClassDistribution::FromProbs({1.2, -0.2}), Error);
}

TEST(ClassDistributionTest, ArgmaxSkipsBackgroundAndBreaksTiesLow) {
  const auto c = ClassDistribution::FromProbs({0.5, 0.25, 0.25});
  EXPECT_EQ(c.Argmax(), 0);
  EXPECT_EQ(c.Argmax(0), 1);
  EXPECT_DOUBLE_EQ(c.MaxProb(0), 0.25);
}

TEST(ParseFramesTest, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(ParseFrames(in).empty());
}

TEST(ParseFramesTest, EmptyHeads) {
  std::istringstream in("{\"frame_id\":\"a\",\"heads\":[[],[]]}\n");
  const auto frames = ParseFrames(in);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].num_heads(), 2);
  EXPECT_TRUE(frames[0].heads[0].empty());
  EXPECT_TRUE(frames[0].heads[1].empty());
}

TEST(ParseFramesTest, ParsesDetection) {
  std::istringstream in("{\"frame_id\":\"a\",\"heads\":[[" + DetJson() + "]]}");
  const auto frames = ParseFrames(in);
  const Detection& d = frames[0].heads[0][0];
  EXPECT_EQ(d.box.l, 4.0);
  EXPECT_EQ(d.head_id, 0);
  EXPECT_DOUBLE_EQ(d.score, d.cls.MaxProb());
}

TEST(ParseFramesTest, ClampsLogVar) {
  std::istringstream in(
      "{\"frame_id\":\"a\",\"heads\":[[{\"box\":[0,0,0,1,1,1,0],"
      "\"log_var\":[-50,50,0,0,0,0,0],\"logits\":[0]}]]}");
  const auto frames = ParseFrames(in);
  EXPECT_EQ(frames[0].heads[0][0].log_var[0], kMinLogVar);
  EXPECT_EQ(frames[0].heads[0][0].log_var[1], kMaxLogVar);
}

TEST(ParseFramesTest, RejectsUnnormalizedProbs) {
  std::istringstream in("{\"frame_id\":\"a\",\"heads\":[[" +
                        DetJson(",\"probs\":[0.5,0.3,0.1]") + "]]}");
  try {
    ParseFrames(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("distribution not normalized"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(ParseFramesTest, RejectsProbsThatDisagreeWithLogits) {
  std::istringstream in("{\"frame_id\":\"a\",\"heads\":[[" +
                        DetJson(",\"probs\":[0.2,0.3,0.5]") + "]]}");
  EXPECT_THROW(ParseFrames(in), Error);
}

TEST(ParseFramesTest, ErrorsCarryLineNumbers) {
  std::istringstream in("{\"frame_id\":\"a\",\"heads\":[[]]}\n\nnot json\n");
  try {
    ParseFrames(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ParseFramesTest, RejectsInconsistentHeadCount) {
  std::istringstream in(
      "{\"frame_id\":\"a\",\"heads\":[[],[]]}\n{\"frame_id\":\"b\",\"heads\":[[]]}\n");
  try {
    ParseFrames(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("inconsistent head count"), std::string::npos);
  }
}

TEST(ParseFramesTest, RejectsBadFields) {
  for (const std::string& bad : std::vector<std::string>{
           "{\"frame_id\":\"a\",\"heads\":[[{\"box\":[0,0,0,1,1,1],\"log_var\":[0,0,0,0,0,0,0],\"logits\":[0]}]]}",
           "{\"frame_id\":\"a\",\"heads\":[[{\"box\":[0,0,0,0,1,1,0],\"log_var\":[0,0,0,0,0,0,0],\"logits\":[0]}]]}",
           "{\"frame_id\":\"a\",\"heads\":[[" + DetJson(",\"score\":1.5") + "]]}",
           "{\"heads\":[[]]}",
           "{\"frame_id\":\"a\",\"heads\":[[" + DetJson() + "," +
               "{\"box\":[0,0,0,1,1,1,0],\"log_var\":[0,0,0,0,0,0,0],\"logits\":[0,1]}]]}",
       }) {
    std::istringstream in(bad);
    EXPECT_THROW(ParseFrames(in), Error) << bad;
  }
}

TEST(ParseFramesTest, RoundTrip) {
  Frame f;
  f.frame_id = "x7";
  Detection d;
  d.box = Box7{1.5, -2.25, 0.1, 4.0, 1.8, 1.6, -0.7};
  d.log_var = {-1, -2, -3, -4, -5, -6, -7};
  d.cls = ClassDistribution::FromLogits({0.1, 0.2, 0.3});
  d.score = 0.123456789;
  f.heads = {{d}, {}};
  d.head_id = 1;
  d.box.yaw = 3.0;
  f.heads[1].push_back(d);
  std::stringstream io;
  std::vector<Frame> frames = {f};
  WriteFrames(io, frames);
  const auto back = ParseFrames(io);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], f);
}

TEST(GroundTruthTest, RoundTripAndRangeCheck) {
  GroundTruthFrame g{"f", {{Box7{0, 0, 0, 1, 2, 3, 0.5}, 2}}};
  std::stringstream io;
  std::vector<GroundTruthFrame> frames = {g};
  WriteGroundTruth(io, frames);
  const std::string text = io.str();
  std::istringstream in(text);
  EXPECT_EQ(ParseGroundTruth(in)[0], g);
  std::istringstream in2(text);
  EXPECT_THROW(ParseGroundTruth(in2, 2), Error);
}

TEST(ClassMapTest, ParsesCommentsAndRejectsDuplicates) {
  std::istringstream in("# names\n0 car\n1 pedestrian  # walking\n\n2 cyclist\n");
  const auto names = ParseClassMap(in);
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(names.at(1), "pedestrian");
  std::istringstream dup("0 car\n0 van\n");
  EXPECT_THROW(ParseClassMap(dup), Error);
  std::ostringstream out;
  WriteClassMap(out, names);
  EXPECT_EQ(out.str(), "0 car\n1 pedestrian\n2 cyclist\n");
}

TEST(AttachGroundTruthTest, ListsMissingFrames) {
  std::vector<Frame> frames(3);
  frames[0].frame_id = "a";
  frames[1].frame_id = "b";
  frames[2].frame_id = "c";
  std::vector<GroundTruthFrame> gts = {{"b", {}}};
  try {
    AttachGroundTruth(frames, gts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("a, c"), std::string::npos);
  }
}

}  // namespace
}  // namespace uqdet
