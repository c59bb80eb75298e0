// Dataset files: UTF-8 text, one SMILES per line, '#' comment lines and
// blank lines ignored.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qdgen/molgraph.hpp"

namespace qdgen::dataset {

struct SmilesRecord {
    std::string smiles;
    size_t line_number = 0;  // 1-based
};

class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& what, size_t line) : std::runtime_error(what), line_(line) {}
    size_t line() const { return line_; }

private:
    size_t line_;
};

// Reads raw records without parsing; throws DatasetError when the file is
// unreadable.
std::vector<SmilesRecord> read_smiles_file(const std::filesystem::path& path);

struct ParsedDataset {
    std::vector<mol::MolecularGraph> molecules;
    std::vector<std::string> smiles;          // source spelling per molecule
    std::vector<std::string> bad_lines;       // "<line>: <error>" entries
};

// Parses every record; lenient mode collects failures in bad_lines instead
// of throwing.
ParsedDataset parse_dataset(const std::vector<SmilesRecord>& records, bool lenient);

void write_smiles_file(const std::filesystem::path& path,
                       const std::vector<std::string>& smiles,
                       const std::vector<std::string>& header_comments);

}  // namespace qdgen::dataset
