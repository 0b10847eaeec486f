#include "vt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "vt/check.hpp"
#include "vt/checkpoint.hpp"
#include "vt/rng.hpp"

namespace vt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string capitalize_words(const std::string& s) {
  std::string out = s;
  bool start = true;
  for (auto& c : out) {
    if (start && std::isalpha(static_cast<unsigned char>(c)))
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    start = (c == ' ');
  }
  return out;
}

}  // namespace

std::vector<TitlePair> load_pairs(const std::string& path) {
  std::ifstream is(path);
  VT_CHECK(is.good(), "load_pairs: cannot open ", path);
  std::vector<TitlePair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_on(line, '\t');
    VT_CHECK(fields.size() == 2 || fields.size() == 3, "load_pairs: line ", lineno,
             ": expected 2 or 3 tab-separated fields, got ", fields.size());
    TitlePair p;
    p.web_title = trim(fields[0]);
    p.voice_title = trim(fields[1]);
    VT_CHECK(!p.web_title.empty(), "load_pairs: line ", lineno, ": empty web title");
    VT_CHECK(!p.voice_title.empty(), "load_pairs: line ", lineno, ": empty voice title");
    if (fields.size() == 3 && !trim(fields[2]).empty()) {
      for (const auto& kv : split_on(trim(fields[2]), ';')) {
        auto eq = kv.find('=');
        VT_CHECK(eq != std::string::npos, "load_pairs: line ", lineno,
                 ": malformed metadata entry '", kv, "'");
        p.metadata[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_pairs(const std::vector<TitlePair>& pairs, const std::string& path) {
  std::string contents;
  for (const auto& p : pairs) {
    contents += p.web_title;
    contents += '\t';
    contents += p.voice_title;
    if (!p.metadata.empty()) {
      contents += '\t';
      bool first = true;
      for (const auto& [k, v] : p.metadata) {
        if (!first) contents += ';';
        contents += k + "=" + v;
        first = false;
      }
    }
    contents += '\n';
  }
  atomic_write(path, contents);
}

std::string augment_with_metadata(const TitlePair& pair) {
  static const char* kOrder[] = {"brand", "container", "size"};
  std::string meta;
  for (const char* key : kOrder) {
    auto it = pair.metadata.find(key);
    if (it == pair.metadata.end()) continue;
    if (!meta.empty()) meta += ' ';
    meta += it->second;
  }
  if (meta.empty()) return pair.web_title;
  return pair.web_title + " | " + meta;
}

SplitResult split(const std::vector<TitlePair>& pairs, std::uint64_t seed) {
  VT_CHECK(pairs.size() >= 3, "split: need at least 3 pairs, got ", pairs.size());
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  std::size_t n = pairs.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(0.72 * n));
  std::size_t n_val = static_cast<std::size_t>(std::llround(0.10 * n));
  if (n_train + n_val > n) n_val = n - n_train;
  SplitResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const TitlePair& p = pairs[idx[i]];
    if (i < n_train)
      r.train.push_back(p);
    else if (i < n_train + n_val)
      r.val.push_back(p);
    else
      r.test.push_back(p);
  }
  return r;
}

CorpusStats compute_stats(const std::vector<TitlePair>& pairs) {
  VT_CHECK(!pairs.empty(), "compute_stats: empty pair list");
  CorpusStats s;
  for (const auto& p : pairs) {
    auto web = Vocab::word_tokens(p.web_title);
    auto voice = Vocab::word_tokens(p.voice_title);
    std::set<std::string> web_set(web.begin(), web.end());
    std::set<std::string> voice_set(voice.begin(), voice.end());
    s.avg_web_len += static_cast<double>(web.size());
    s.avg_voice_len += static_cast<double>(voice.size());
    s.avg_unique_web += static_cast<double>(web_set.size());
    s.avg_unique_voice += static_cast<double>(voice_set.size());
    int novel = 0;
    for (const auto& w : voice_set)
      if (!web_set.count(w)) ++novel;
    s.avg_novel_unigrams += novel;
  }
  double n = static_cast<double>(pairs.size());
  s.avg_web_len /= n;
  s.avg_voice_len /= n;
  s.avg_unique_web /= n;
  s.avg_unique_voice /= n;
  s.avg_novel_unigrams /= n;
  return s;
}

std::string article_for(const std::string& word) {
  VT_CHECK(!word.empty(), "article_for: empty word");
  char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
  if (std::isdigit(static_cast<unsigned char>(c))) {
    // spoken number: "eight...", "eleven", "eighteen" take "an"
    std::string digits;
    for (char d : word) {
      if (!std::isdigit(static_cast<unsigned char>(d))) break;
      digits += d;
    }
    if (!digits.empty() && digits[0] == '8') return "an";
    if (digits == "11" || digits == "18") return "an";
    return "a";
  }
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

namespace {

const std::vector<std::string> kCommonBrands = {
    "great value", "wesson",       "oneida",      "wonderful",    "outshine",
    "smithfield",  "libby's",      "marketside",  "horizon",      "paas",
    "jergens",     "glade",        "sunbelle",    "hillcrest",    "meadow farms",
    "golden acre", "silver creek", "blue harbor", "crisp garden", "morning glow",
    "sunny grove", "red barn",     "green valley", "royal mills"};

const std::vector<std::string> kExoticBrands = {
    "zorvina", "quintara", "xanlor", "zephyrell", "qumara", "zylket",
    "xolvera", "quorvex"};

const std::vector<std::string> kProducts = {
    "pizza sauce",        "canola oil",          "roasted & salted pistachios",
    "frozen fruit bars",  "sliced salt pork",    "sweet peas",
    "breakfast cereal",   "egg decorating kit",  "plastic cups",
    "dinner forks",       "apple juice",         "peanut butter",
    "tomato soup",        "greek yogurt",        "orange soda",
    "trail mix",          "mac & cheese dinner", "chocolate chip cookies",
    "whole wheat bread",  "basmati rice",        "olive oil spread",
    "vanilla ice cream",  "baby spinach",        "sparkling water"};

const std::vector<std::string> kContainers = {
    "bag", "box", "bottle", "jar", "can", "pack", "jug", "carton", "tub", "pouch"};

const std::vector<std::pair<std::string, std::string>> kUnits = {
    {"oz", "ounce"}, {"fl oz", "fluid ounce"}, {"gal", "gallon"}, {"lb", "pound"}};

const std::vector<std::string> kNumbers = {"1",  "2",  "3",  "4",    "5",    "6",
                                           "8",  "10", "12", "16",   "18",   "20",
                                           "24", "7.5", "12.5", "20.5"};
const std::vector<std::string> kIntNumbers = {"2", "3", "4", "5", "6", "8", "10", "12"};

std::string voice_form(const std::string& s) {
  // expand "&" for the spoken side
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '&')
      out += "and";
    else
      out += s[i];
  }
  return lowercase(out);
}

}  // namespace

const std::vector<std::string>& synthetic_brands() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v = kCommonBrands;
    v.insert(v.end(), kExoticBrands.begin(), kExoticBrands.end());
    return v;
  }();
  return all;
}

const std::vector<std::string>& synthetic_exotic_brands() { return kExoticBrands; }

SyntheticData generate_synthetic(int n, std::uint64_t seed) {
  VT_CHECK(n >= 1, "generate_synthetic: n must be >= 1, got ", n);
  Rng rng(seed);
  SyntheticData out;
  const auto& brands = synthetic_brands();
  for (int i = 0; i < n; ++i) {
    const std::string& brand = brands[rng.uniform_int(static_cast<int>(brands.size()))];
    const std::string& product = kProducts[rng.uniform_int(static_cast<int>(kProducts.size()))];
    const std::string& container =
        kContainers[rng.uniform_int(static_cast<int>(kContainers.size()))];
    const auto& unit = kUnits[rng.uniform_int(static_cast<int>(kUnits.size()))];
    const std::string& num = kNumbers[rng.uniform_int(static_cast<int>(kNumbers.size()))];
    std::string brand_w = capitalize_words(brand);
    std::string product_w = capitalize_words(product);
    std::string brand_v = lowercase(brand);
    std::string product_v = voice_form(product);

    TitlePair p;
    int tmpl = rng.uniform_int(4);  // 0,1 unit; 2 plain; 3 count
    if (tmpl <= 1) {
      p.web_title = brand_w + " " + product_w + ", " + num + " " + unit.first +
                    " a " + container + " " + brand_w;
      p.voice_title = article_for(num) + " " + num + " " + unit.second + " " +
                      container + " of " + brand_v + " " + product_v;
    } else if (tmpl == 2) {
      p.web_title = brand_w + " " + product_w + " a " + container + " " + brand_w;
      p.voice_title = "a " + container + " of " + brand_v + " " + product_v;
    } else {
      const std::string& cnum =
          kIntNumbers[rng.uniform_int(static_cast<int>(kIntNumbers.size()))];
      p.web_title = brand_w + " " + product_w + ", " + cnum + " ct a " + container;
      p.voice_title = article_for(cnum) + " " + cnum + " count " + container +
                      " of " + brand_v + " " + product_v;
    }
    if (rng.bernoulli(0.3)) {
      p.metadata["brand"] = brand_w;
      p.metadata["container"] = container;
      if (tmpl <= 1) p.metadata["size"] = num + " " + unit.first;
    }
    out.pairs.push_back(std::move(p));

    // multi-sentence product description for pretraining
    const std::string& dnum =
        kIntNumbers[rng.uniform_int(static_cast<int>(kIntNumbers.size()))];
    std::vector<std::string> sentences = {
        "the " + brand_v + " " + product_v + " is a favorite for families",
        "this " + product_v + " comes in a " + dnum + " " + unit.second + " " + container,
        "enjoy the fresh taste of " + brand_v + " " + product_v + " at home",
        "each " + container + " contains " + dnum + " servings of " + product_v,
        "add " + brand_v + " " + product_v + " to your pantry today"};
    int n_sent = 3 + rng.uniform_int(3);
    std::string desc;
    for (int s = 0; s < n_sent; ++s) {
      if (s) desc += " ";
      desc += sentences[s] + ".";
    }
    out.descriptions.push_back(std::move(desc));
  }
  return out;
}

std::vector<PretrainInstance> make_pretrain_instances(
    const std::vector<std::string>& descriptions, const Vocab& vocab,
    std::uint64_t seed) {
  VT_CHECK(!descriptions.empty(), "make_pretrain_instances: empty description set");
  Rng rng(seed);

  // sentence-segment each description on period boundaries
  std::vector<std::vector<std::vector<int>>> docs;  // doc -> sentence -> ids
  for (const auto& d : descriptions) {
    std::vector<std::vector<int>> sents;
    for (const auto& raw : split_on(d, '.')) {
      std::string s = trim(raw);
      if (s.empty()) continue;
      auto ids = vocab.encode(s);
      if (!ids.empty()) sents.push_back(std::move(ids));
    }
    VT_CHECK(!sents.empty(), "make_pretrain_instances: description with no sentences");
    docs.push_back(std::move(sents));
  }

  std::vector<PretrainInstance> out;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    for (std::size_t si = 0; si < docs[di].size(); ++si) {
      PretrainInstance inst;
      const auto& a = docs[di][si];
      bool has_next = si + 1 < docs[di].size();
      bool positive = has_next && rng.bernoulli(0.5);
      std::vector<int> b;
      if (positive) {
        b = docs[di][si + 1];
        inst.is_next = true;
      } else {
        // random negative from a different description when possible
        std::size_t dj = di;
        if (docs.size() > 1) {
          do {
            dj = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(docs.size())));
          } while (dj == di);
        }
        const auto& cand = docs[dj];
        b = cand[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(cand.size())))];
        inst.is_next = false;
      }

      inst.ids.push_back(Vocab::kCls);
      inst.ids.insert(inst.ids.end(), a.begin(), a.end());
      inst.ids.push_back(Vocab::kSep);
      inst.ids.insert(inst.ids.end(), b.begin(), b.end());
      inst.ids.push_back(Vocab::kSep);
      if (static_cast<int>(inst.ids.size()) > kMaxPretrainLen) {
        inst.ids.resize(kMaxPretrainLen - 1);
        inst.ids.push_back(Vocab::kSep);
      }

      std::vector<int> candidates;
      for (std::size_t i = 0; i < inst.ids.size(); ++i)
        if (!vocab.is_special(inst.ids[i])) candidates.push_back(static_cast<int>(i));
      if (candidates.empty()) continue;
      int k = std::max(1, static_cast<int>(std::llround(0.15 * candidates.size())));
      k = std::min({k, kMaxPredictions, static_cast<int>(candidates.size())});
      rng.shuffle(candidates);
      candidates.resize(static_cast<std::size_t>(k));
      std::sort(candidates.begin(), candidates.end());
      for (int pos : candidates) {
        inst.masked_positions.push_back(pos);
        inst.original_ids.push_back(inst.ids[pos]);
        double r = rng.uniform();
        if (r < 0.8) {
          inst.ids[pos] = Vocab::kMask;
        } else if (r < 0.9) {
          inst.ids[pos] =
              Vocab::kNumSpecials +
              rng.uniform_int(vocab.size() - Vocab::kNumSpecials);
        }  // else keep the original token
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace vt
