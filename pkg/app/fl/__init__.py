"""
联邦学习模块初始化文件
"""
