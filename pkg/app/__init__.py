"""
CATFL 应用包
"""
