"""
密码协议模块初始化文件
"""
