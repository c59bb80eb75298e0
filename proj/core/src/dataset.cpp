#include "qdgen/dataset.hpp"

#include <fstream>

namespace qdgen::dataset {

std::vector<SmilesRecord> read_smiles_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot read dataset file: " + path.string(), 0);
    std::vector<SmilesRecord> records;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        if (start > 0) line.erase(0, start);
        if (line.empty() || line[0] == '#') continue;
        records.push_back({line, line_number});
    }
    return records;
}

ParsedDataset parse_dataset(const std::vector<SmilesRecord>& records, bool lenient) {
    ParsedDataset out;
    for (const SmilesRecord& rec : records) {
        try {
            out.molecules.push_back(mol::parse_smiles(rec.smiles));
            out.smiles.push_back(rec.smiles);
        } catch (const mol::SmilesError& e) {
            if (!lenient)
                throw DatasetError("line " + std::to_string(rec.line_number) + ": " + e.what(),
                                   rec.line_number);
            out.bad_lines.push_back(std::to_string(rec.line_number) + ": " + e.what());
        }
    }
    return out;
}

void write_smiles_file(const std::filesystem::path& path,
                       const std::vector<std::string>& smiles,
                       const std::vector<std::string>& header_comments) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write dataset file: " + path.string(), 0);
    for (const std::string& comment : header_comments) out << "# " << comment << "\n";
    for (const std::string& s : smiles) out << s << "\n";
}

}  // namespace qdgen::dataset
