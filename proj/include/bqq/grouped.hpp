#pragma once

#include <cstdint>
#include <vector>

#include "bqq/matrix.hpp"
#include "bqq/random.hpp"

namespace bqq {

struct BlockTile {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Row-major tiling into blocks of at most group_rows x group_cols; trailing
// blocks keep their natural (smaller) size.
inline std::vector<BlockTile> tile(std::size_t rows, std::size_t cols, std::size_t group_rows,
                                   std::size_t group_cols) {
    if (group_rows == 0 || group_cols == 0)
        throw MatrixError("tile: group dimensions must be at least 1");
    std::vector<BlockTile> tiles;
    for (std::size_t i = 0; i < rows; i += group_rows)
        for (std::size_t j = 0; j < cols; j += group_cols)
            tiles.push_back({i, j, std::min(group_rows, rows - i), std::min(group_cols, cols - j)});
    return tiles;
}

// Seed of block `index`. A single-block tiling uses the run seed itself, so
// whole-matrix quantization is unaffected by going through this path.
inline std::uint64_t block_seed(std::uint64_t seed, std::size_t index, std::size_t num_blocks) {
    if (num_blocks <= 1)
        return seed;
    return CounterRng(seed, 0xb10c0000ULL + index).next_u64();
}

template <class Code>
struct GroupedCode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t group_rows = 0;
    std::size_t group_cols = 0;
    std::vector<Code> blocks;  // in tile() order

    std::vector<BlockTile> tiles() const { return tile(rows, cols, group_rows, group_cols); }
};

// quantizer(block, seed) -> Code, called once per tile.
template <class Quantizer>
auto groupwise_quantize(const DenseMatrix& w, std::size_t group_rows, std::size_t group_cols, std::uint64_t seed,
                        Quantizer&& quantizer) {
    using Code = decltype(quantizer(w, seed));
    GroupedCode<Code> out;
    out.rows = w.rows();
    out.cols = w.cols();
    out.group_rows = group_rows;
    out.group_cols = group_cols;
    const auto tiles = out.tiles();
    out.blocks.reserve(tiles.size());
    for (std::size_t b = 0; b < tiles.size(); ++b) {
        const auto& t = tiles[b];
        out.blocks.push_back(quantizer(w.block(t.row, t.col, t.rows, t.cols), block_seed(seed, b, tiles.size())));
    }
    return out;
}

// decoder(code) -> DenseMatrix of the block's shape.
template <class Code, class Decoder>
DenseMatrix groupwise_dequantize(const GroupedCode<Code>& code, Decoder&& decoder) {
    const auto tiles = code.tiles();
    if (tiles.size() != code.blocks.size())
        throw MatrixError("groupwise_dequantize: block count does not match the tiling");
    DenseMatrix out(code.rows, code.cols);
    for (std::size_t b = 0; b < tiles.size(); ++b) {
        const DenseMatrix block = decoder(code.blocks[b]);
        if (block.rows() != tiles[b].rows || block.cols() != tiles[b].cols)
            throw MatrixError("groupwise_dequantize: block " + std::to_string(b) + " has the wrong shape");
        out.set_block(tiles[b].row, tiles[b].col, block);
    }
    return out;
}

} // namespace bqq
