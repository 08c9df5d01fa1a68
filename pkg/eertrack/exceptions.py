# -*- coding: utf-8 -*-
"""eertrack exceptions."""


class EertrackError(Exception):
    """Base class for all eertrack errors."""


class ConfigError(EertrackError):

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__('invalid configuration:\n  ' + '\n  '.join(self.problems))


class RegionError(EertrackError):
    pass


class NumericError(EertrackError):

    def __init__(self, layer, message='non-finite value'):
        self.layer = layer
        super().__init__('{} in layer {}'.format(message, layer))


class InsufficientDataError(EertrackError):
    pass


class DivergenceError(EertrackError):

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__('training diverged at epoch {} (loss={})'.format(epoch, loss))


class WeightsFormatError(EertrackError):
    pass


class PlotError(EertrackError):
    pass
