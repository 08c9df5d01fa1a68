# -*- coding: utf-8 -*-
"""Motion model weights file.

Layout (little endian):

    header  '<8sHHHHHH'  magic, format version, d_model, heads, layers, d_ff, K_in
    body    float64      every weight array flattened in `DmmnParams.weight_shapes` order,
                         followed by the final train and validation losses

"""

import logging
import struct
from collections import OrderedDict

import numpy as np

from ..exceptions import WeightsFormatError
from .model import DmmnParams


logger = logging.getLogger('eertrack')

MAGIC = b'EERDMMN\x00'
FORMAT_VERSION = 1


class WeightsHeader(object):

    FORMAT = '<8sHHHHHH'
    BYTE_COUNT = struct.calcsize(FORMAT)

    def __init__(self, d_model, heads, layers, d_ff, k_in, version=FORMAT_VERSION):
        self.version = version
        self.d_model = d_model
        self.heads = heads
        self.layers = layers
        self.d_ff = d_ff
        self.k_in = k_in

    def __bytes__(self):
        return struct.pack(self.FORMAT, MAGIC, self.version, self.d_model, self.heads, self.layers,
                           self.d_ff, self.k_in)

    @classmethod
    def decode(cls, data):
        try:
            magic, version, d_model, heads, layers, d_ff, k_in = struct.unpack_from(cls.FORMAT, data)
        except struct.error:
            raise WeightsFormatError('truncated weights header')
        if magic != MAGIC:
            raise WeightsFormatError('not a motion model weights file (bad magic {!r})'.format(magic))
        if version != FORMAT_VERSION:
            raise WeightsFormatError('unsupported weights format version {} (expected {})'.format(
                version, FORMAT_VERSION))
        return cls(d_model, heads, layers, d_ff, k_in, version)


def encode_weights(p):
    header = WeightsHeader(p.d_model, p.heads, p.layers, p.d_ff, p.k_in)
    body = [w.astype('<f8').ravel() for w in p.weights.values()]
    body.append(np.array([p.train_loss, p.val_loss], dtype='<f8'))
    return bytes(header) + np.concatenate(body).tobytes()


def decode_weights(data):
    header = WeightsHeader.decode(data)
    if not header.heads or header.d_model % header.heads:
        raise WeightsFormatError('d_model {} not divisible by {} heads'.format(header.d_model, header.heads))
    shapes = DmmnParams.weight_shapes(header.d_model, header.layers, header.d_ff)
    count = sum(int(np.prod(s)) for s in shapes.values()) + 2
    body = data[WeightsHeader.BYTE_COUNT:]
    if len(body) != 8 * count:
        raise WeightsFormatError('weights body has {} bytes, expected {}'.format(len(body), 8 * count))
    flat = np.frombuffer(body, dtype='<f8').astype(float)
    weights = OrderedDict()
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        weights[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return DmmnParams(header.d_model, header.heads, header.layers, header.d_ff, header.k_in, weights,
                      train_loss=flat[offset], val_loss=flat[offset + 1])


def save_weights(path, p):
    with open(path, 'wb') as f:
        f.write(encode_weights(p))
    logger.info('wrote motion model weights to {}'.format(path))


def load_weights(path):
    with open(path, 'rb') as f:
        data = f.read()
    p = decode_weights(data)
    logger.debug('loaded {} from {}'.format(p, path))
    return p
