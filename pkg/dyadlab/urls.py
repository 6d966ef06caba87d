"""
URL configuration for the dyadlab project.

Only the admin is routed; it is used to browse recorded experiment runs
(`python manage.py runserver` then /admin/).
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path("admin/", admin.site.urls),
]
