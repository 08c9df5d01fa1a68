# -*- coding: utf-8 -*-

import struct

import numpy as np
import pytest

from eertrack.dmmn.model import DmmnParams
from eertrack.dmmn.weights import (
    FORMAT_VERSION,
    MAGIC,
    WeightsHeader,
    decode_weights,
    encode_weights,
    load_weights,
    save_weights,
)
from eertrack.exceptions import WeightsFormatError


@pytest.fixture
def params():
    p = DmmnParams.initialize(np.random.default_rng(4), d_model=8, heads=2, layers=2, d_ff=16, k_in=6,
                              zero_decoder=False)
    return p.with_weights(p.weights, train_loss=0.125, val_loss=0.25)


class TestWeightsFile:

    def test_save_and_load(self, tmp_path, params):
        path = str(tmp_path / 'model.weights')
        save_weights(path, params)
        loaded = load_weights(path)
        assert loaded.hyper == params.hyper
        assert list(loaded.weights) == list(params.weights)
        for name in params.weights:
            np.testing.assert_array_equal(loaded.weights[name], params.weights[name])
        assert loaded.train_loss == 0.125
        assert loaded.val_loss == 0.25

    def test_header_layout(self, params):
        data = encode_weights(params)
        magic, version, d_model, heads, layers, d_ff, k_in = struct.unpack_from('<8sHHHHHH', data)
        assert magic == MAGIC
        assert version == FORMAT_VERSION
        assert (d_model, heads, layers, d_ff, k_in) == (8, 2, 2, 16, 6)

    def test_bad_magic(self, params):
        data = b'NOTDMMN\x00' + encode_weights(params)[8:]
        with pytest.raises(WeightsFormatError):
            decode_weights(data)

    def test_unsupported_version(self, params):
        data = bytes(WeightsHeader(8, 2, 2, 16, 6, version=FORMAT_VERSION + 1)) + \
            encode_weights(params)[WeightsHeader.BYTE_COUNT:]
        with pytest.raises(WeightsFormatError) as exc:
            decode_weights(data)
        assert 'version' in str(exc.value)

    def test_truncated_header(self):
        with pytest.raises(WeightsFormatError):
            decode_weights(MAGIC + b'\x01')

    def test_truncated_body(self, params):
        with pytest.raises(WeightsFormatError):
            decode_weights(encode_weights(params)[:-8])

    def test_trailing_bytes(self, params):
        with pytest.raises(WeightsFormatError):
            decode_weights(encode_weights(params) + b'\x00' * 8)

    def test_header_disagrees_with_body(self, params):
        data = bytes(WeightsHeader(16, 2, 2, 16, 6)) + encode_weights(params)[WeightsHeader.BYTE_COUNT:]
        with pytest.raises(WeightsFormatError):
            decode_weights(data)
