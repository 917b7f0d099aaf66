"""
基准测试与成本模型初始化文件
"""
