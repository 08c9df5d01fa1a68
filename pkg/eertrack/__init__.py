# -*- coding: utf-8 -*-

"""Top-level package for eertrack."""

__author__ = """eertrack developers"""
__version__ = '0.1.0'
