"""
仿真模块初始化文件
"""
