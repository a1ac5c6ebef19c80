#pragma once

#include <fstream>
#include <string>
#include <unordered_set>

#include "waffle/util/errors.hpp"

namespace waffle {

// One word per line; blank and '#' lines skipped.
class StopWords {
public:
    StopWords() = default;

    static StopWords load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open stop-word file: " + path);
        StopWords sw;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) sw.words_.insert(line);
        }
        return sw;
    }

    void add(const std::string& word) { words_.insert(word); }
    bool contains(const std::string& word) const { return words_.count(word) != 0; }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

}  // namespace waffle
