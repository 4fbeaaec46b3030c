#include "spmat/manifest.hpp"
#include "spmat/rng.hpp"
#include "spmat/structure.hpp"
#include "spmat/synthetic.hpp"
#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace spmat;
using testing_support::TempDir;

namespace {

std::string cif(const std::string &cell, const std::string &sites) {
  return "data_test\n" + cell +
         "loop_\n_atom_site_label\n_atom_site_type_symbol\n"
         "_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n" +
         sites;
}

const std::string kCubic3 = "_cell_length_a 3.0\n_cell_length_b 3.0\n_cell_length_c 3.0\n"
                            "_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\n";

} // namespace

TEST(ParseCif, CubicCellIsDiagonal) {
  const auto s = parse_cif(cif(kCubic3, "Fe1 Fe 0 0 0\n"));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      EXPECT_EQ(s.lattice[r][c], r == c ? 3.0 : 0.0);
  ASSERT_EQ(s.sites.size(), 1u);
  EXPECT_EQ(s.sites[0].z, 26);
  EXPECT_EQ(s.sites[0].frac, (Vec3{0, 0, 0}));
}

TEST(ParseCif, WrapsFractionalCoordinates) {
  const auto s = parse_cif(cif(kCubic3, "Fe1 Fe 1.25 -0.25 0.5\n"));
  EXPECT_EQ(s.sites[0].frac, (Vec3{0.25, 0.75, 0.5}));
}

TEST(ParseCif, HexagonalCellMatrix) {
  const auto s = parse_cif(cif("_cell_length_a 2.0\n_cell_length_b 2.0\n_cell_length_c 3.0\n"
                               "_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 120\n",
                               "C1 C 0 0 0\n"));
  // b = (b cos g, b sin g, 0) with cos 120 = -1/2, sin 120 = sqrt(3)/2.
  const double expect[3][3] = {{2, 0, 0}, {-1, std::sqrt(3.0), 0}, {0, 0, 3}};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      EXPECT_NEAR(s.lattice[r][c], expect[r][c], 1e-12) << r << "," << c;
}

TEST(ParseCif, LabelUsedWhenTypeSymbolAbsentAndUncertaintiesStripped) {
  const std::string text = "data_x\n" + kCubic3 +
                           "loop_\n_atom_site_label\n_atom_site_fract_x\n_atom_site_fract_y\n"
                           "_atom_site_fract_z\nNa1 0.1(2) 0.2 0.3\ncl2 0.5 0.5 0.5\n";
  const auto s = parse_cif(text);
  ASSERT_EQ(s.sites.size(), 2u);
  EXPECT_EQ(s.sites[0].z, 11);
  EXPECT_EQ(s.sites[1].z, 17);
  EXPECT_DOUBLE_EQ(s.sites[0].frac[0], 0.1);
}

TEST(ParseCif, Errors) {
  EXPECT_SPMAT_ERROR(parse_cif(cif("_cell_length_a 3\n_cell_length_b 3\n_cell_angle_alpha 90\n"
                                   "_cell_angle_beta 90\n_cell_angle_gamma 90\n",
                                   "Fe1 Fe 0 0 0\n")),
                     ErrorCode::MissingTag);
  EXPECT_SPMAT_ERROR(parse_cif(cif(kCubic3, "Xx1 Xx 0 0 0\n")), ErrorCode::UnknownElement);
  EXPECT_SPMAT_ERROR(parse_cif(cif(kCubic3, "Fe1 Fe 0 abc 0\n")), ErrorCode::MalformedNumber);
  EXPECT_SPMAT_ERROR(parse_cif("_symmetry_space_group_name_H-M 'F m -3 m'\n" + cif(kCubic3, "Fe1 Fe 0 0 0\n")),
                     ErrorCode::NonP1Symmetry);
  EXPECT_SPMAT_ERROR(parse_cif(cif(kCubic3, "") + "loop_\n_symmetry_equiv_pos_as_xyz\nx,y,z\n-x,-y,-z\n"),
                     ErrorCode::NonP1Symmetry);
}

TEST(ParseCif, P1DeclarationsAccepted) {
  const auto s = parse_cif("_symmetry_space_group_name_H-M 'P 1'\n_space_group_IT_number 1\n" +
                           cif(kCubic3, "Fe1 Fe 0 0 0\n") + "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n");
  EXPECT_EQ(s.sites.size(), 1u);
}

TEST(ParseCif, MalformedNumberReportsLine) {
  try {
    parse_cif(cif(kCubic3, "Fe1 Fe 0 0 0\nFe2 Fe 0.5 0.5 0..5\n"));
    FAIL() << "expected MalformedNumber";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedNumber);
    EXPECT_NE(std::string(e.what()).find("line 15"), std::string::npos) << e.what();
  }
}

TEST(ParseCif, WriteParseRoundTrip) {
  SyntheticConfig cfg;
  cfg.n_crystals = 10;
  cfg.seed = 11;
  for (const auto &s : generate_synthetic_dataset(cfg).structures) {
    const auto back = parse_cif(write_cif(s), s.id);
    ASSERT_EQ(back.sites.size(), s.sites.size());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(back.lattice[r][c], s.lattice[r][c], 1e-10);
    for (std::size_t i = 0; i < s.sites.size(); ++i) {
      EXPECT_EQ(back.sites[i].z, s.sites[i].z);
      for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(back.sites[i].frac[c], s.sites[i].frac[c], 1e-10);
    }
  }
}

TEST(Lattice, ParametersRoundTrip) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    CellParameters p{rng.uniform(2, 9), rng.uniform(2, 9), rng.uniform(2, 9),
                     rng.uniform(70, 110), rng.uniform(70, 110), rng.uniform(70, 110)};
    Mat3 L;
    try {
      L = lattice_from_parameters(p);
    } catch (const Error &) {
      continue; // impossible angle triple
    }
    const auto q = cell_parameters(L);
    EXPECT_NEAR(q.a, p.a, 1e-8);
    EXPECT_NEAR(q.b, p.b, 1e-8);
    EXPECT_NEAR(q.c, p.c, 1e-8);
    EXPECT_NEAR(q.alpha, p.alpha, 1e-8);
    EXPECT_NEAR(q.beta, p.beta, 1e-8);
    EXPECT_NEAR(q.gamma, p.gamma, 1e-8);
    EXPECT_GT(determinant(L), 0);
  }
}

TEST(Lattice, WrapFraction) {
  EXPECT_EQ(wrap_fraction(-0.25), 0.75);
  EXPECT_EQ(wrap_fraction(1.0), 0.0);
  EXPECT_EQ(wrap_fraction(2.5), 0.5);
  EXPECT_LT(wrap_fraction(-1e-18), 1.0);
}

TEST(Manifest, ParsesAndCountsClasses) {
  const auto m = parse_manifest("id,cif_path,surrogate_label,target,split\n"
                                "a,x/a.cif,0,1.5,train\nb,/abs/b.cif,1,,test\n",
                                "/base");
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.num_classes(), 2);
  EXPECT_EQ(m.records[0].cif_path, std::filesystem::path("/base/x/a.cif"));
  EXPECT_EQ(m.records[1].cif_path, std::filesystem::path("/abs/b.cif"));
  EXPECT_FALSE(m.records[1].target.has_value());
  EXPECT_EQ(m.records[1].surrogate_label, 1);
  EXPECT_EQ(m.records[1].split, Split::Test);
  EXPECT_TRUE(m.has_split_column());
}

TEST(Manifest, Errors) {
  EXPECT_SPMAT_ERROR(parse_manifest("id,cif_path,surrogate_label,target,split\na,a.cif,0,,\nb,b.cif,2,,\n", "."),
                     ErrorCode::NonContiguousLabels);
  EXPECT_SPMAT_ERROR(parse_manifest("id,cif_path,surrogate_label,target,split\na,a.cif,0,,\na,b.cif,0,,\n", "."),
                     ErrorCode::DuplicateId);
  EXPECT_SPMAT_ERROR(parse_manifest("id,cif_path,target\na,a.cif,1\n", "."), ErrorCode::MissingColumn);
}

TEST(Manifest, SaveLoadRoundTrip) {
  TempDir dir("manifest");
  DatasetManifest m;
  m.records.push_back({"a", dir.path() / "cif/a.cif", 0, 1.25, Split::Train});
  m.records.push_back({"b", dir.path() / "cif/b.cif", 1, std::nullopt, std::nullopt});
  save_manifest(dir.path() / "m.csv", m);
  EXPECT_EQ(load_manifest(dir.path() / "m.csv"), m);
}

TEST(Synthetic, DeterministicAndLabelled) {
  SyntheticConfig cfg;
  cfg.n_crystals = 4;
  cfg.n_classes = 2;
  cfg.seed = 7;
  const auto a = generate_synthetic_dataset(cfg);
  const auto b = generate_synthetic_dataset(cfg);
  EXPECT_EQ(a.structures, b.structures);
  EXPECT_EQ(a.manifest, b.manifest);
  for (std::size_t i = 0; i < a.structures.size(); ++i)
    EXPECT_EQ(write_cif(a.structures[i]), write_cif(b.structures[i]));
}

TEST(Synthetic, NoiseFreeTargetIsRecomputable) {
  SyntheticConfig cfg;
  cfg.n_crystals = 30;
  cfg.target_noise = 0;
  cfg.seed = 3;
  const auto d = generate_synthetic_dataset(cfg);
  for (std::size_t i = 0; i < d.structures.size(); ++i) {
    const auto &s = d.structures[i];
    double zsum = 0;
    for (const auto &site : s.sites)
      zsum += site.z;
    const double expect = 0.04 * zsum / static_cast<double>(s.sites.size()) +
                          0.5 * std::log(std::abs(determinant(s.lattice)));
    EXPECT_NEAR(*d.manifest.records[i].target, expect, 1e-12);
    EXPECT_EQ(*d.manifest.records[i].surrogate_label, synthetic_label(s, cfg.n_classes));
  }
}

TEST(Synthetic, ClassCountsAndGeometry) {
  SyntheticConfig cfg;
  cfg.n_crystals = 200;
  cfg.seed = 1;
  const auto d = generate_synthetic_dataset(cfg);
  int counts[2] = {0, 0};
  for (const auto &r : d.manifest.records)
    ++counts[*r.surrogate_label];
  EXPECT_GE(counts[0], 1);
  EXPECT_GE(counts[1], 1);
  for (const auto &s : d.structures) {
    EXPECT_GE(s.sites.size(), 2u);
    EXPECT_LE(s.sites.size(), cfg.max_atoms);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(s.lattice[a][a], 3.0);
      EXPECT_LE(s.lattice[a][a], 8.0);
    }
    // minimum image separation
    for (std::size_t i = 0; i < s.sites.size(); ++i)
      for (std::size_t j = i + 1; j < s.sites.size(); ++j) {
        double dd = 0;
        for (int c = 0; c < 3; ++c) {
          double f = s.sites[j].frac[c] - s.sites[i].frac[c];
          f -= std::round(f);
          dd += std::pow(f * s.lattice[c][c], 2);
        }
        EXPECT_GE(std::sqrt(dd), kMinSeparation - 1e-12);
      }
  }
}

TEST(Synthetic, InvalidConfig) {
  SyntheticConfig cfg;
  cfg.n_classes = 1;
  EXPECT_SPMAT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  cfg.n_classes = 4;
  cfg.n_crystals = 3;
  EXPECT_SPMAT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
}
