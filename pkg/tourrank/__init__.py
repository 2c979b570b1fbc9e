"""
TourRank - 锦标赛式零样本文档重排序
"""

__version__ = '0.1.0'
